use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the state space: a finite real vector of fixed dimension.
///
/// Points compare by exact coordinates. Negative zero is folded into zero
/// at construction so that `-0.0` and `0.0` describe the same atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatePoint(Vec<f64>);

impl StatePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("state {coords:?}")));
        }
        Ok(Self(coords.into_iter().map(|c| c + 0.0).collect()))
    }

    /// One-dimensional point.
    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x]).expect("finite scalar state")
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Round every coordinate to the nearest multiple of `quantum`.
    pub(crate) fn quantized(&self, quantum: f64) -> Self {
        Self(
            self.0
                .iter()
                .map(|c| (c / quantum).round() * quantum + 0.0)
                .collect(),
        )
    }
}

impl Eq for StatePoint {}

impl PartialOrd for StatePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StatePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl std::hash::Hash for StatePoint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for c in &self.0 {
            c.to_bits().hash(state);
        }
    }
}

impl fmt::Display for StatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A (partial) trajectory: one state per period.
pub type Path = Vec<StatePoint>;

/// Build a one-dimensional path from scalars.
pub fn scalar_path(values: &[f64]) -> Path {
    values.iter().copied().map(StatePoint::scalar).collect()
}
