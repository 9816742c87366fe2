//! Exact optimal transport between finite distributions.
//!
//! [`solve_ot`] runs the transportation (network) simplex on the bipartite
//! graph of atoms. [`ot_bruteforce`] enumerates every basic feasible solution
//! of tiny instances and serves as an independent oracle in tests.

mod bruteforce;
mod network_simplex;

use ndarray::Array2;

pub use bruteforce::{ot_bruteforce, BRUTEFORCE_CAP};
pub use network_simplex::solve_ot;

use crate::error::{Error, Result};
use crate::process::{check_compatible, Distribution, FiniteProcess, MetricSpec};

/// Marginal tolerance accepted by the solvers.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Source weights, target weights and a cost matrix of p-th-power costs.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    mu: Vec<f64>,
    nu: Vec<f64>,
    cost: Array2<f64>,
}

impl TransportProblem {
    pub fn new(mu: Vec<f64>, nu: Vec<f64>, cost: Array2<f64>) -> Result<Self> {
        if mu.is_empty() || nu.is_empty() {
            return Err(Error::EmptyInput);
        }
        if cost.dim() != (mu.len(), nu.len()) {
            return Err(Error::InvalidArgument(format!(
                "cost matrix is {:?}, marginals are {}x{}",
                cost.dim(),
                mu.len(),
                nu.len()
            )));
        }
        if cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "costs must be finite and nonnegative".into(),
            ));
        }
        for (index, &w) in mu.iter().chain(&nu).enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NonPositiveWeight { index, weight: w });
            }
        }
        let left: f64 = mu.iter().sum();
        let right: f64 = nu.iter().sum();
        if (left - right).abs() > MARGINAL_TOL * left.max(right).max(1.0) {
            return Err(Error::InfeasibleMarginals { left, right });
        }
        Ok(Self { mu, nu, cost })
    }

    /// Builds the cost matrix from a pairwise cost function.
    pub fn from_fn<A, B>(
        mu: &[(A, f64)],
        nu: &[(B, f64)],
        mut cost: impl FnMut(&A, &B) -> Result<f64>,
    ) -> Result<Self> {
        let mut c = Array2::zeros((mu.len(), nu.len()));
        for (i, (a, _)) in mu.iter().enumerate() {
            for (j, (b, _)) in nu.iter().enumerate() {
                c[[i, j]] = cost(a, b)?;
            }
        }
        Self::new(
            mu.iter().map(|(_, w)| *w).collect(),
            nu.iter().map(|(_, w)| *w).collect(),
            c,
        )
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cost.dim()
    }

    /// Same marginals, different cost matrix.
    pub fn with_cost(&self, cost: Array2<f64>) -> Result<Self> {
        Self::new(self.mu.clone(), self.nu.clone(), cost)
    }
}

/// An optimal coupling of the two marginals and its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub entries: Array2<f64>,
    pub value: f64,
}

impl TransportPlan {
    /// ⟨cost, plan⟩.
    pub fn cost_under(&self, cost: &Array2<f64>) -> f64 {
        (&self.entries * cost).sum()
    }

    /// Largest deviation of the plan's row/column sums from the marginals.
    pub fn marginal_error(&self, prob: &TransportProblem) -> f64 {
        let rows = self.entries.sum_axis(ndarray::Axis(1));
        let cols = self.entries.sum_axis(ndarray::Axis(0));
        rows.iter()
            .zip(prob.mu())
            .chain(cols.iter().zip(prob.nu()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `W_p` between two processes, treating each path as one atom.
pub fn wasserstein(a: &FiniteProcess, b: &FiniteProcess, m: &MetricSpec) -> Result<f64> {
    Ok(m.root(wasserstein_plan(a, b, m)?.value))
}

/// Optimal plan for `W_p^p` over leaf pairs (rows: leaves of `a`).
pub fn wasserstein_plan(
    a: &FiniteProcess,
    b: &FiniteProcess,
    m: &MetricSpec,
) -> Result<TransportPlan> {
    check_compatible(a, b)?;
    let pa = a.paths();
    let pb = b.paths();
    let prob = TransportProblem::from_fn(&pa, &pb, |x, y| m.path_cost(x, y))?;
    solve_ot(&prob)
}

/// `W_p^p` between two laws on path space (no root taken).
pub fn distribution_cost(a: &Distribution, b: &Distribution, m: &MetricSpec) -> Result<f64> {
    if let ([(x, _)], [(y, _)]) = (a.atoms(), b.atoms()) {
        return m.path_cost(x, y);
    }
    let prob = TransportProblem::from_fn(a.atoms(), b.atoms(), |x, y| m.path_cost(x, y))?;
    Ok(solve_ot(&prob)?.value)
}
