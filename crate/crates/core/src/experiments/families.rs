use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::io::load_scenario;
use crate::process::{scalar_path, FiniteProcess, MetricSpec, DEFAULT_TOL};

/// `{(ε, 1): ½, (-ε, -1): ½}`: the first coordinate reveals the second.
///
/// At `ε = 0` this is the limit `{(0, 1): ½, (0, -1): ½}`.
pub fn epsilon_reveal(eps: f64) -> FiniteProcess {
    FiniteProcess::from_paths(
        &[
            (scalar_path(&[eps, 1.0]), 0.5),
            (scalar_path(&[-eps, -1.0]), 0.5),
        ],
        DEFAULT_TOL,
    )
    .expect("well-formed family")
}

/// Limit of [`epsilon_reveal`] and [`vanishing_noise`].
pub fn epsilon_limit() -> FiniteProcess {
    epsilon_reveal(0.0)
}

/// `(±ε, ±1)` with independent signs: the jitter carries no information.
pub fn vanishing_noise(eps: f64) -> FiniteProcess {
    let paths: Vec<_> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(s, y)| (scalar_path(&[s * eps, y]), 0.25))
        .collect();
    FiniteProcess::from_paths(&paths, DEFAULT_TOL).expect("well-formed family")
}

/// `horizon`-step ±1 random walk from 0 with up-probability `(1 + δ) / 2`.
pub fn binomial_walk(delta: f64, horizon: usize) -> FiniteProcess {
    let up = 0.5 * (1.0 + delta);
    let mut paths = Vec::new();
    for mask in 0u32..(1 << horizon) {
        let mut level = 0.0;
        let mut states = Vec::with_capacity(horizon);
        let mut weight = 1.0;
        for t in 0..horizon {
            if mask >> t & 1 == 1 {
                level += 1.0;
                weight *= up;
            } else {
                level -= 1.0;
                weight *= 1.0 - up;
            }
            states.push(level);
        }
        if weight > 0.0 {
            paths.push((scalar_path(&states), weight));
        }
    }
    FiniteProcess::from_paths(&paths, DEFAULT_TOL).expect("well-formed family")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    EpsilonReveal,
    VanishingNoise,
    BinomialPerturb { horizon: usize },
    /// `μ_n = μ` for every `n`.
    Constant(Box<FiniteProcess>),
    /// Scenario files: `pattern` with `{n}` replaced by the step, plus the
    /// limit file.
    Custom { pattern: String, limit: PathBuf },
}

impl Family {
    /// Built-in families by name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "epsilon_reveal" => Ok(Family::EpsilonReveal),
            "vanishing_noise" => Ok(Family::VanishingNoise),
            "binomial_perturb" => Ok(Family::BinomialPerturb { horizon: 3 }),
            "constant" => Ok(Family::Constant(Box::new(epsilon_limit()))),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::EpsilonReveal => "epsilon_reveal",
            Family::VanishingNoise => "vanishing_noise",
            Family::BinomialPerturb { .. } => "binomial_perturb",
            Family::Constant(_) => "constant",
            Family::Custom { .. } => "custom",
        }
    }
}

/// A process family with the schedule `ε_n = eps0 · ratio^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub family: Family,
    pub eps0: f64,
    pub ratio: f64,
    pub metric: MetricSpec,
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            eps0: 1.0,
            ratio: 0.1,
            metric: MetricSpec::absolute(1.0),
        }
    }

    /// Checks that the schedule decreases strictly to zero.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps0 = {} must be positive",
                self.eps0
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio = {} must lie in (0, 1)",
                self.ratio
            )));
        }
        if let Family::BinomialPerturb { horizon } = self.family {
            if horizon == 0 || horizon > 12 {
                return Err(Error::InvalidArgument(format!(
                    "binomial horizon {horizon} must lie in 1..=12"
                )));
            }
            if self.eps0 > 1.0 {
                return Err(Error::InvalidArgument(
                    "binomial perturbation eps0 must be <= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self, n: usize) -> f64 {
        self.eps0 * self.ratio.powi(n as i32)
    }
}

/// The `n`-th member of the family.
pub fn make_family(spec: &FamilySpec, n: usize) -> Result<FiniteProcess> {
    spec.validate()?;
    let eps = spec.epsilon(n);
    Ok(match &spec.family {
        Family::EpsilonReveal => epsilon_reveal(eps),
        Family::VanishingNoise => vanishing_noise(eps),
        Family::BinomialPerturb { horizon } => binomial_walk(eps, *horizon),
        Family::Constant(base) => (**base).clone(),
        Family::Custom { pattern, .. } => {
            load_scenario(pattern.replace("{n}", &n.to_string()))?.process
        }
    })
}

/// The `n → ∞` limit of the family.
pub fn make_limit(spec: &FamilySpec) -> Result<FiniteProcess> {
    spec.validate()?;
    Ok(match &spec.family {
        Family::EpsilonReveal | Family::VanishingNoise => epsilon_limit(),
        Family::BinomialPerturb { horizon } => binomial_walk(0.0, *horizon),
        Family::Constant(base) => (**base).clone(),
        Family::Custom { limit, .. } => load_scenario(limit)?.process,
    })
}
