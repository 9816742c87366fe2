use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped loosely by the exit code the CLI maps them to:
/// input/parse problems, shape mismatches, and solver failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no paths supplied")]
    EmptyInput,

    #[error("path {index} has length {found}, expected {expected}")]
    RaggedPaths {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("horizon mismatch: left process has N = {left}, right process has N = {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("path {index} has nonpositive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("prefix of length {0} is not in the support")]
    PrefixNotInSupport(usize),

    #[error("range {from}..={to} is out of bounds for horizon {horizon}")]
    RangeOutOfBounds {
        from: usize,
        to: usize,
        horizon: usize,
    },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("state {0:?} is not a point of the distance table")]
    UnknownTablePoint(Vec<f64>),

    #[error("marginals are infeasible: total masses {left} and {right} differ")]
    InfeasibleMarginals { left: f64, right: f64 },

    #[error("instance too large for {what}: {size} exceeds the cap {cap}")]
    InstanceTooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("coupling violates causality ({0} violated constraints)")]
    NotCausal(usize),

    #[error("reward missing on support node at depth {depth}")]
    MissingReward { depth: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
