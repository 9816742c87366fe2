//! Causal and bicausal couplings as linear programs.
//!
//! Variables are the masses `π(x, y)` of leaf pairs. Causality from the
//! source `X` to the target `Y` asks that the law of `Y_{1..t}` given the
//! whole path `X` depend only on `X_{1..t}`. For a source prefix `a` of
//! length `t`, a source path `x` through `a` and a target prefix `b` of the
//! same length, this reads (denominators cleared)
//!
//! ```text
//! π(x, b) · μ(a) = μ(x) · π(a, b)
//! ```
//!
//! where `π(x, b)` and `π(a, b)` are sums of variables over the paths
//! through `b` (and `a`). Within each `(a, b)` group the equalities sum to a
//! tautology, so one per group is dropped. The program keeps the equivalent
//! sibling form `μ(x₁) π(x, b) = μ(x) π(x₁, b)`, with `x₁` the first path
//! through `a`, whose coefficients are leaf masses only. Bicausal programs
//! add the same family with the roles of source and target exchanged.

use std::cmp::Ordering;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram};
use crate::process::{check_compatible, FiniteProcess, MetricSpec, NodeId, StatePoint};
use crate::transport::{solve_ot, TransportProblem};

/// Default tolerance of [`check_causality`] on conditional probabilities.
pub const CAUSALITY_TOL: f64 = 1e-8;

/// Which causality families constrain a coupling of `(μ, ν)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Causal from `μ` (first argument) to `ν`.
    Forward,
    /// Causal from `ν` to `μ`.
    Backward,
    /// Causal in both directions.
    Bicausal,
}

impl Direction {
    fn forward(self) -> bool {
        matches!(self, Direction::Forward | Direction::Bicausal)
    }

    fn backward(self) -> bool {
        matches!(self, Direction::Backward | Direction::Bicausal)
    }
}

/// A causal transport program over the leaf pairs of two trees.
#[derive(Clone, Debug)]
pub struct CausalLP {
    pub lp: LinearProgram,
    pub direction: Direction,
    /// Leaves of the source (rows) and target (columns).
    pub shape: (usize, usize),
    pub marginal_rows: usize,
    /// Causality equalities produced by the schema.
    pub generated_causality: usize,
    /// Equalities kept after dropping one per `(a, b)` group.
    pub retained_causality: usize,
    row_names: Vec<String>,
}

impl CausalLP {
    pub fn num_vars(&self) -> usize {
        self.lp.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.lp.rows.len()
    }

    /// Nonzero coefficients over all rows.
    pub fn nonzeros(&self) -> usize {
        self.lp.rows.iter().map(Vec::len).sum()
    }

    /// The program in CPLEX LP text format with fixed-point decimals.
    pub fn to_lp_format(&self) -> String {
        let ny = self.shape.1;
        let var = |v: usize| format!("x_{}_{}", v / ny, v % ny);
        let mut out = String::new();
        let _ = writeln!(out, "\\ {:?} transport program", self.direction);
        let _ = writeln!(out, "Minimize");
        let mut obj = String::from(" obj:");
        for (v, c) in self.lp.objective.iter().enumerate() {
            let _ = write!(obj, " {} {:.12} {}", if v == 0 { "" } else { "+" }, c, var(v));
        }
        let _ = writeln!(out, "{obj}");
        let _ = writeln!(out, "Subject To");
        for ((row, rhs), name) in self.lp.rows.iter().zip(&self.lp.rhs).zip(&self.row_names) {
            let mut line = format!(" {name}:");
            for &(v, c) in row {
                let sign = if c < 0.0 { "-" } else { "+" };
                let _ = write!(line, " {sign} {:.12} {}", c.abs(), var(v));
            }
            let _ = writeln!(out, "{line} = {rhs:.12}");
        }
        let _ = writeln!(out, "End");
        out
    }
}

/// Builds the transport program of `direction` between `mu` and `nu`.
pub fn build_causal_lp(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
    direction: Direction,
) -> Result<CausalLP> {
    check_compatible(mu, nu)?;
    let xs = mu.paths();
    let ys = nu.paths();
    let (nx, ny) = (xs.len(), ys.len());
    let mut objective = Vec::with_capacity(nx * ny);
    for (x, _) in &xs {
        for (y, _) in &ys {
            objective.push(m.path_cost(x, y)?);
        }
    }
    let mut lp = LinearProgram::new(nx * ny, objective);
    let mut row_names = Vec::new();
    for (i, (_, w)) in xs.iter().enumerate() {
        lp.add_row((0..ny).map(|j| (i * ny + j, 1.0)).collect(), *w);
        row_names.push(format!("mu_{i}"));
    }
    // The last column sum follows from the others; leaving it out keeps the
    // rows consistent when the two weight vectors round differently.
    for (j, (_, w)) in ys.iter().enumerate().take(ny - 1) {
        lp.add_row((0..nx).map(|i| (i * ny + j, 1.0)).collect(), *w);
        row_names.push(format!("nu_{j}"));
    }
    let marginal_rows = nx + ny - 1;
    let mut generated = 0;
    let mut retained = 0;
    let var_fwd = |i: usize, j: usize| i * ny + j;
    let var_bwd = |j: usize, i: usize| i * ny + j;
    if direction.forward() {
        let (g, r) = add_causality_rows(mu, nu, &var_fwd, &mut lp, &mut row_names, "cf");
        generated += g;
        retained += r;
    }
    if direction.backward() {
        let (g, r) = add_causality_rows(nu, mu, &var_bwd, &mut lp, &mut row_names, "cb");
        generated += g;
        retained += r;
    }
    Ok(CausalLP {
        lp,
        direction,
        shape: (nx, ny),
        marginal_rows,
        generated_causality: generated,
        retained_causality: retained,
        row_names,
    })
}

/// Adds causality rows from `src` to `dst`; `var(i, j)` maps a source leaf
/// position and target leaf position to the LP variable.
fn add_causality_rows(
    src: &FiniteProcess,
    dst: &FiniteProcess,
    var: &dyn Fn(usize, usize) -> usize,
    lp: &mut LinearProgram,
    names: &mut Vec<String>,
    tag: &str,
) -> (usize, usize) {
    let horizon = src.horizon();
    let (mut generated, mut retained) = (0, 0);
    for t in 1..horizon {
        for &a in src.level(t) {
            let a_leaves = src.node(a).leaf_range.clone();
            let first = a_leaves.start;
            let mass_first = src.node(src.leaves()[first]).mass;
            for &b in dst.level(t) {
                let b_leaves = dst.node(b).leaf_range.clone();
                generated += a_leaves.len();
                // μ(x₁) π(x, b) = μ(x) π(x₁, b) for the other paths x.
                for x in a_leaves.clone().skip(1) {
                    let mass_x = src.node(src.leaves()[x]).mass;
                    let mut row = Vec::with_capacity(2 * b_leaves.len());
                    for j in b_leaves.clone() {
                        row.push((var(x, j), mass_first));
                        row.push((var(first, j), -mass_x));
                    }
                    lp.add_row(row, 0.0);
                    names.push(format!("{tag}_t{t}_a{a}_x{x}_b{b}"));
                    retained += 1;
                }
            }
        }
    }
    (generated, retained)
}

/// Diagnostics attached to a returned coupling.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Certificate {
    pub marginal_violation: f64,
    pub forward_violation: f64,
    pub backward_violation: f64,
}

/// A coupling of two trees over leaf pairs (rows: leaves of the first).
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub plan: Array2<f64>,
    /// `E_π[ρ(X, Y)^p]`.
    pub cost: f64,
    pub certificate: Certificate,
}

impl Coupling {
    /// Wraps a plan and computes its cost and certificate.
    pub fn new(
        plan: Array2<f64>,
        mu: &FiniteProcess,
        nu: &FiniteProcess,
        m: &MetricSpec,
    ) -> Result<Self> {
        check_compatible(mu, nu)?;
        let xs = mu.paths();
        let ys = nu.paths();
        if plan.dim() != (xs.len(), ys.len()) {
            return Err(Error::InvalidArgument(format!(
                "plan shape {:?} does not match {}x{} leaves",
                plan.dim(),
                xs.len(),
                ys.len()
            )));
        }
        let mut cost = 0.0;
        for (i, (x, _)) in xs.iter().enumerate() {
            for (j, (y, _)) in ys.iter().enumerate() {
                if plan[[i, j]] != 0.0 {
                    cost += plan[[i, j]] * m.path_cost(x, y)?;
                }
            }
        }
        let rows = plan.sum_axis(ndarray::Axis(1));
        let cols = plan.sum_axis(ndarray::Axis(0));
        let marginal_violation = rows
            .iter()
            .zip(&xs)
            .map(|(r, (_, w))| (r - w).abs())
            .chain(cols.iter().zip(&ys).map(|(c, (_, w))| (c - w).abs()))
            .fold(0.0, f64::max);
        let worst = |d| {
            violations(&plan, mu, nu, d)
                .iter()
                .map(|v| v.gap)
                .fold(0.0, f64::max)
        };
        let certificate = Certificate {
            marginal_violation,
            forward_violation: worst(Direction::Forward),
            backward_violation: worst(Direction::Backward),
        };
        Ok(Self {
            plan,
            cost,
            certificate,
        })
    }

    /// The independent coupling `μ ⊗ ν`.
    pub fn product(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<Self> {
        let a: Vec<f64> = mu.paths().iter().map(|(_, w)| *w).collect();
        let b: Vec<f64> = nu.paths().iter().map(|(_, w)| *w).collect();
        let plan = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        Self::new(plan, mu, nu, m)
    }

    /// The coupling `(X, X)` of a tree with itself.
    pub fn identity(mu: &FiniteProcess, m: &MetricSpec) -> Result<Self> {
        let w: Vec<f64> = mu.paths().iter().map(|(_, w)| *w).collect();
        Self::new(Array2::from_diag(&ndarray::Array1::from(w)), mu, mu, m)
    }

    /// The same coupling seen from the other side.
    pub fn transposed(&self) -> Self {
        Self {
            plan: self.plan.t().to_owned(),
            cost: self.cost,
            certificate: Certificate {
                marginal_violation: self.certificate.marginal_violation,
                forward_violation: self.certificate.backward_violation,
                backward_violation: self.certificate.forward_violation,
            },
        }
    }
}

/// One violated causality equality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausalityViolation {
    /// `Forward` for constraints conditioning on `μ`, `Backward` for `ν`.
    pub direction: Direction,
    pub t: usize,
    /// Prefix node `a` of the conditioning tree.
    pub source_prefix: NodeId,
    /// Leaf `x` (through `a`) of the conditioning tree.
    pub source_path: NodeId,
    /// Prefix node `b` of the other tree.
    pub target_prefix: NodeId,
    /// `|π(b | x) - π(b | a)|`.
    pub gap: f64,
}

fn violations(
    plan: &Array2<f64>,
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    direction: Direction,
) -> Vec<CausalityViolation> {
    let mut out = Vec::new();
    if direction.forward() {
        collect_gaps(mu, nu, |i, j| plan[[i, j]], Direction::Forward, &mut out);
    }
    if direction.backward() {
        collect_gaps(nu, mu, |j, i| plan[[i, j]], Direction::Backward, &mut out);
    }
    out
}

fn collect_gaps(
    src: &FiniteProcess,
    dst: &FiniteProcess,
    entry: impl Fn(usize, usize) -> f64,
    direction: Direction,
    out: &mut Vec<CausalityViolation>,
) {
    for t in 1..src.horizon() {
        for &a in src.level(t) {
            let a_leaves = src.node(a).leaf_range.clone();
            let a_mass = src.node(a).mass;
            for &b in dst.level(t) {
                let b_leaves = dst.node(b).leaf_range.clone();
                let joint_x: Vec<f64> = a_leaves
                    .clone()
                    .map(|x| b_leaves.clone().map(|j| entry(x, j)).sum())
                    .collect();
                let cond_a = joint_x.iter().sum::<f64>() / a_mass;
                for (k, x) in a_leaves.clone().enumerate() {
                    let leaf = src.leaves()[x];
                    let cond_x = joint_x[k] / src.node(leaf).mass;
                    out.push(CausalityViolation {
                        direction,
                        t,
                        source_prefix: a,
                        source_path: leaf,
                        target_prefix: b,
                        gap: (cond_x - cond_a).abs(),
                    });
                }
            }
        }
    }
}

/// Causality equalities of `direction` violated by more than `tol`
/// (compared on conditional probabilities).
pub fn check_causality(
    coupling: &Coupling,
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    direction: Direction,
    tol: f64,
) -> Vec<CausalityViolation> {
    violations(&coupling.plan, mu, nu, direction)
        .into_iter()
        .filter(|v| v.gap > tol)
        .collect()
}

fn solve_causal(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
    direction: Direction,
) -> Result<(f64, Coupling)> {
    let prog = build_causal_lp(mu, nu, m, direction)?;
    let (plan, value) = if prog.retained_causality == 0 {
        // Only marginal rows: plain transport.
        let cost = Array2::from_shape_vec(prog.shape, prog.lp.objective.clone())
            .expect("shape matches");
        let prob = TransportProblem::new(
            mu.paths().iter().map(|x| x.1).collect(),
            nu.paths().iter().map(|y| y.1).collect(),
            cost,
        )?;
        let sol = solve_ot(&prob)?;
        (sol.entries, sol.value)
    } else {
        let sol = lp::solve(&prog.lp)?;
        let plan = Array2::from_shape_vec(prog.shape, sol.x).expect("shape matches");
        (plan, sol.value)
    };
    let coupling = Coupling::new(plan, mu, nu, m)?;
    let bad = check_causality(&coupling, mu, nu, direction, CAUSALITY_TOL);
    if !bad.is_empty() {
        return Err(Error::Solver(format!(
            "optimal plan violates {} causality constraints",
            bad.len()
        )));
    }
    Ok((m.root(value), coupling))
}

/// `CW_p(μ, ν)`: optimal transport over couplings causal from `μ` to `ν`.
pub fn causal_distance(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
) -> Result<(f64, Coupling)> {
    solve_causal(mu, nu, m, Direction::Forward)
}

/// `SCW_p(μ, ν) = max(CW_p(μ, ν), CW_p(ν, μ))`.
pub fn symmetrized_causal(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<f64> {
    let (fwd, _) = causal_distance(mu, nu, m)?;
    let (bwd, _) = causal_distance(nu, mu, m)?;
    Ok(fwd.max(bwd))
}

/// `AW_p(μ, ν)` from the bicausal linear program.
///
/// The arguments are put in a canonical order first, so the result is
/// exactly symmetric.
pub fn bicausal_distance_lp(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
) -> Result<(f64, Coupling)> {
    if path_order(mu, nu) == Ordering::Greater {
        let (value, coupling) = solve_causal(nu, mu, m, Direction::Bicausal)?;
        return Ok((value, coupling.transposed()));
    }
    solve_causal(mu, nu, m, Direction::Bicausal)
}

/// Lexicographic order on the (path, weight) lists.
fn path_order(a: &FiniteProcess, b: &FiniteProcess) -> Ordering {
    let key = |p: &FiniteProcess| -> Vec<f64> {
        p.paths()
            .into_iter()
            .flat_map(|(path, w)| {
                path.into_iter()
                    .flat_map(|s| s.coords().to_vec())
                    .chain([w])
            })
            .collect()
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| ka.len().cmp(&kb.len()))
}

/// Largest number of first-period atoms per side accepted by
/// [`two_period_lifted_cw`].
pub const LIFTED_ATOM_CAP: usize = 5;

/// Causal distance of two-period processes through their disintegrations.
///
/// Each process is viewed as a law of pairs `(x₁, μ_{x₁})`. For a coupling
/// `γ` of these laws, the target atom `y₁` sees the γ-mixture of the source
/// conditionals, and the cost is `ρ(x₁, y₁)^p + W_p(mixture, ν_{y₁})^p`. The
/// inner transport is folded into one joint linear program over `γ` and one
/// scaled coupling per target atom. Size-capped test oracle.
pub fn two_period_lifted_cw(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<f64> {
    check_compatible(mu, nu)?;
    if mu.horizon() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two-period formula needs N = 2, got N = {}",
            mu.horizon()
        )));
    }
    let atoms_x = mu.level(1);
    let atoms_y = nu.level(1);
    let size = atoms_x.len().max(atoms_y.len());
    if size > LIFTED_ATOM_CAP {
        return Err(Error::InstanceTooLarge {
            what: "two-period lifted causal distance",
            size,
            cap: LIFTED_ATOM_CAP,
        });
    }
    let state = |p: &FiniteProcess, id: NodeId| -> StatePoint {
        p.node(id).state.clone().expect("non-root node")
    };
    // Second-period support of the source side.
    let mut support_x: Vec<StatePoint> = mu.level(2).iter().map(|&l| state(mu, l)).collect();
    support_x.sort();
    support_x.dedup();
    let (nx, ny, nu2) = (atoms_x.len(), atoms_y.len(), support_x.len());

    // Variables: γ (nx·ny), then κ_j over support_x × children(y_j).
    let mut objective = Vec::new();
    for &a in atoms_x {
        for &b in atoms_y {
            objective.push(m.ground_cost(&state(mu, a), &state(nu, b))?);
        }
    }
    let mut kappa_offset = Vec::with_capacity(ny);
    for &b in atoms_y {
        kappa_offset.push(objective.len());
        for u in &support_x {
            for &c in &nu.node(b).children {
                objective.push(m.ground_cost(u, &state(nu, c))?);
            }
        }
    }
    let mut lp = LinearProgram::new(objective.len(), objective);
    for (i, &a) in atoms_x.iter().enumerate() {
        lp.add_row((0..ny).map(|j| (i * ny + j, 1.0)).collect(), mu.node(a).mass);
    }
    for (j, &b) in atoms_y.iter().enumerate() {
        lp.add_row((0..nx).map(|i| (i * ny + j, 1.0)).collect(), nu.node(b).mass);
    }
    for (j, &b) in atoms_y.iter().enumerate() {
        let kids = &nu.node(b).children;
        let kappa = |u: usize, v: usize| kappa_offset[j] + u * kids.len() + v;
        // First marginal of κ_j: Σ_i γ_ij μ̂_i.
        for (u, point) in support_x.iter().enumerate() {
            let mut row: Vec<(usize, f64)> = (0..kids.len()).map(|v| (kappa(u, v), 1.0)).collect();
            for (i, &a) in atoms_x.iter().enumerate() {
                let a_mass = mu.node(a).mass;
                if let Some(&c) = mu
                    .node(a)
                    .children
                    .iter()
                    .find(|&&c| mu.node(c).state.as_ref() == Some(point))
                {
                    row.push((i * ny + j, -mu.node(c).mass / a_mass));
                }
            }
            lp.add_row(row, 0.0);
        }
        // Second marginal of κ_j: q_j ν̂_j.
        for (v, &c) in kids.iter().enumerate() {
            lp.add_row((0..nu2).map(|u| (kappa(u, v), 1.0)).collect(), nu.node(c).mass);
        }
    }
    let sol = lp::solve(&lp)?;
    Ok(m.root(sol.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{epsilon_limit, epsilon_reveal};
    use crate::process::{scalar_path, DEFAULT_TOL};
    use crate::transport::wasserstein;

    const EPS: f64 = 0.1;

    fn m1() -> MetricSpec {
        MetricSpec::absolute(1.0)
    }

    #[test]
    fn forward_constraints_are_tautological_for_revealing_source() {
        let prog =
            build_causal_lp(&epsilon_reveal(EPS), &epsilon_limit(), &m1(), Direction::Forward)
                .unwrap();
        // Every depth-1 source prefix has a single extension.
        assert_eq!(prog.generated_causality, 2);
        assert_eq!(prog.retained_causality, 0);
        assert_eq!(prog.num_rows(), prog.marginal_rows);
    }

    #[test]
    fn backward_schema_count() {
        let prog =
            build_causal_lp(&epsilon_limit(), &epsilon_reveal(EPS), &m1(), Direction::Forward)
                .unwrap();
        // 2 source paths through prefix (0) times 2 target prefixes.
        assert_eq!(prog.generated_causality, 4);
        assert_eq!(prog.retained_causality, 2);
    }

    #[test]
    fn single_period_has_no_causality_rows() {
        let a = FiniteProcess::from_paths(
            &[(scalar_path(&[0.0]), 1.0), (scalar_path(&[1.0]), 1.0)],
            DEFAULT_TOL,
        )
        .unwrap();
        let prog = build_causal_lp(&a, &a, &m1(), Direction::Bicausal).unwrap();
        assert_eq!(prog.generated_causality, 0);
    }

    #[test]
    fn causal_distance_examples() {
        let mu = epsilon_reveal(EPS);
        let nu = epsilon_limit();
        let (fwd, c) = causal_distance(&mu, &nu, &m1()).unwrap();
        assert!((fwd - 0.1).abs() < 1e-9, "{fwd}");
        assert!(check_causality(&c, &mu, &nu, Direction::Forward, 1e-8).is_empty());
        let (bwd, c) = causal_distance(&nu, &mu, &m1()).unwrap();
        assert!((bwd - 1.1).abs() < 1e-9, "{bwd}");
        assert!(check_causality(&c, &nu, &mu, Direction::Forward, 1e-8).is_empty());
        let (zero, _) = causal_distance(&mu, &mu, &m1()).unwrap();
        assert!(zero.abs() < 1e-12);
    }

    #[test]
    fn scw_and_aw_examples() {
        let mu = epsilon_reveal(EPS);
        let nu = epsilon_limit();
        let scw = symmetrized_causal(&mu, &nu, &m1()).unwrap();
        assert!((scw - 1.1).abs() < 1e-9);
        assert_eq!(scw, symmetrized_causal(&nu, &mu, &m1()).unwrap());
        let (aw, c) = bicausal_distance_lp(&mu, &nu, &m1()).unwrap();
        assert!((aw - 1.1).abs() < 1e-9);
        assert!(check_causality(&c, &mu, &nu, Direction::Bicausal, 1e-8).is_empty());
        assert!(symmetrized_causal(&mu, &mu, &m1()).unwrap().abs() < 1e-12);
        assert!(bicausal_distance_lp(&mu, &mu, &m1()).unwrap().0.abs() < 1e-12);
    }

    #[test]
    fn product_and_identity_are_bicausal() {
        let mu = epsilon_reveal(EPS);
        let nu = epsilon_limit();
        let prod = Coupling::product(&mu, &nu, &m1()).unwrap();
        assert!(check_causality(&prod, &mu, &nu, Direction::Bicausal, 1e-12).is_empty());
        let id = Coupling::identity(&mu, &m1()).unwrap();
        assert!(check_causality(&id, &mu, &mu, Direction::Bicausal, 1e-12).is_empty());
    }

    #[test]
    fn sign_matched_plan_is_not_causal_from_the_limit() {
        let mu = epsilon_reveal(EPS);
        let nu = epsilon_limit();
        // Rows: ν leaves (0,-1), (0,1); columns: μ leaves (-ε,-1), (ε,1).
        let plan = ndarray::array![[0.5, 0.0], [0.0, 0.5]];
        let c = Coupling::new(plan, &nu, &mu, &m1()).unwrap();
        assert!((c.cost - 0.1).abs() < 1e-12);
        let bad = check_causality(&c, &nu, &mu, Direction::Forward, 1e-8);
        assert_eq!(bad.len(), 4);
        assert!(bad.iter().all(|v| (v.gap - 0.5).abs() < 1e-12));
        // In the other direction the same plan is fine.
        assert!(check_causality(&c, &nu, &mu, Direction::Backward, 1e-8).is_empty());
    }

    #[test]
    fn lifted_formula_examples() {
        let mu = epsilon_reveal(EPS);
        let nu = epsilon_limit();
        assert!((two_period_lifted_cw(&mu, &nu, &m1()).unwrap() - 0.1).abs() < 1e-9);
        assert!((two_period_lifted_cw(&nu, &mu, &m1()).unwrap() - 1.1).abs() < 1e-9);
        assert!(two_period_lifted_cw(&mu, &mu, &m1()).unwrap().abs() < 1e-12);
        let three = FiniteProcess::dirac(scalar_path(&[0.0, 0.0, 0.0])).unwrap();
        assert!(two_period_lifted_cw(&three, &three, &m1()).is_err());
    }

    #[test]
    fn single_period_collapse() {
        let a = FiniteProcess::from_paths(
            &[(scalar_path(&[0.0]), 1.0), (scalar_path(&[2.0]), 3.0)],
            DEFAULT_TOL,
        )
        .unwrap();
        let b = FiniteProcess::from_paths(
            &[(scalar_path(&[1.0]), 1.0), (scalar_path(&[-1.0]), 1.0)],
            DEFAULT_TOL,
        )
        .unwrap();
        let w = wasserstein(&a, &b, &m1()).unwrap();
        assert_eq!(causal_distance(&a, &b, &m1()).unwrap().0, w);
        assert_eq!(causal_distance(&b, &a, &m1()).unwrap().0, w);
        assert_eq!(bicausal_distance_lp(&a, &b, &m1()).unwrap().0, w);
    }

    #[test]
    fn lp_dump_is_deterministic() {
        let prog = build_causal_lp(
            &epsilon_limit(),
            &epsilon_reveal(EPS),
            &m1(),
            Direction::Bicausal,
        )
        .unwrap();
        let text = prog.to_lp_format();
        assert_eq!(text, prog.to_lp_format());
        assert!(text.starts_with("\\ Bicausal transport program\nMinimize\n obj:"));
        assert!(text.contains("Subject To"));
        assert!(text.trim_end().ends_with("End"));
        assert!(text.contains("= 0.500000000000"));
    }
}
