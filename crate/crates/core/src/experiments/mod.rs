//! Process families and convergence studies.
//!
//! A study evaluates every distance of the crate between the members
//! `μ_n` of a family and its limit, together with the stopping-value gaps
//! of a reward panel and the gap of `p`-th moments.

mod families;

pub use families::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::causal::{bicausal_distance_lp, causal_distance};
use crate::error::Result;
use crate::nested::nested_distance;
use crate::process::{FiniteProcess, Path, StatePoint, DEFAULT_TOL};
use crate::stopping::{snell_value, Convention, RewardSpec};
use crate::topologies::{aldous_distance, hellwig_distance};
use crate::transport::wasserstein;

/// Distance columns of a report, in CSV order.
pub const DISTANCE_COLUMNS: [&str; 8] = ["W", "CW_fwd", "CW_bwd", "SCW", "AW", "ND", "IW", "ALDOUS"];

/// Values below this are treated as zero when classifying.
pub const ZERO_TOL: f64 = 1e-6;
/// Bound on the adapted columns once `AW` has vanished.
pub const ADAPTED_TOL: f64 = 1e-3;
/// Shrink factor over the schedule that counts as tending to zero.
pub const VANISH_FACTOR: f64 = 0.05;
/// Slack of the row invariants between LP values.
pub const ORDER_TOL: f64 = 1e-9;
/// Slack of `|AW - ND|`.
pub const AGREEMENT_TOL: f64 = 1e-7;

/// Shape of random scenario trees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomTreeSpec {
    pub horizon: usize,
    pub max_branching: usize,
    pub dim: usize,
}

/// A random tree: each node gets `1..=max_branching` children with states
/// drawn from a grid on `[-2, 2]` and random positive weights.
pub fn random_process(rng: &mut impl Rng, spec: RandomTreeSpec) -> FiniteProcess {
    fn grow(
        rng: &mut impl Rng,
        spec: RandomTreeSpec,
        prefix: &mut Path,
        weight: f64,
        out: &mut Vec<(Path, f64)>,
    ) {
        if prefix.len() == spec.horizon {
            out.push((prefix.clone(), weight));
            return;
        }
        let k = rng.random_range(1..=spec.max_branching);
        let shares: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = shares.iter().sum();
        for share in shares {
            let coords = (0..spec.dim)
                .map(|_| f64::from(rng.random_range(-8i32..=8)) / 4.0)
                .collect();
            prefix.push(StatePoint::new(coords).expect("finite grid point"));
            grow(rng, spec, prefix, weight * share / total, out);
            prefix.pop();
        }
    }
    let mut paths = Vec::new();
    grow(rng, spec, &mut Vec::new(), 1.0, &mut paths);
    FiniteProcess::from_paths(&paths, DEFAULT_TOL).expect("well-formed random tree")
}

/// An unclipped affine reward `L_t(x) = a_t + Σ_{s ≤ t} b_{t,s} x_s` with
/// coefficients in `[-1, 1]`; its Lipschitz constant is `max |b|`.
pub fn random_lipschitz_reward(rng: &mut impl Rng, horizon: usize) -> RewardSpec {
    let intercept = (0..horizon).map(|_| rng.random_range(-0.5..0.5)).collect();
    let coef = (1..=horizon)
        .map(|t| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    RewardSpec::ClippedLinear {
        intercept,
        coef,
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    }
}

/// Default reward panel: the stopping panel reward and two random
/// Lipschitz rewards (fixed seed).
pub fn default_reward_panel(horizon: usize) -> Vec<(String, RewardSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    vec![
        ("DV_panel".to_string(), RewardSpec::panel()),
        ("DV_lip1".to_string(), random_lipschitz_reward(&mut rng, horizon)),
        ("DV_lip2".to_string(), random_lipschitz_reward(&mut rng, horizon)),
    ]
}

/// How a family approaches its limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// `AW` vanishes.
    #[serde(rename = "adapted")]
    Adapted,
    /// `W` vanishes but `AW` does not.
    #[serde(rename = "weak-only")]
    WeakOnly,
    #[serde(rename = "none")]
    None,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Adapted => "adapted",
            Classification::WeakOnly => "weak-only",
            Classification::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub eps: f64,
    /// One value per entry of [`ConvergenceReport::columns`].
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub p: f64,
    pub columns: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
    /// Per column: does it tend to zero along the schedule.
    pub vanishing: Vec<bool>,
    pub classification: Classification,
    /// Broken row invariants and failed direction checks.
    pub violations: Vec<String>,
}

impl ConvergenceReport {
    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of one column.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.n.to_string());
            for v in &row.values {
                out.push(',');
                out.push_str(&crate::format::sig12(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// A column tends to zero if its last value is below [`ZERO_TOL`], or if
/// it is nonincreasing and has shrunk by at least [`VANISH_FACTOR`].
fn vanishes(series: &[f64]) -> bool {
    let Some(&last) = series.last() else {
        return false;
    };
    if last < ZERO_TOL {
        return true;
    }
    series.len() >= 2
        && series.windows(2).all(|w| w[1] <= w[0] + ORDER_TOL)
        && last <= VANISH_FACTOR * series[0]
}

fn row_violations(row: &ConvergenceRow) -> Vec<String> {
    let v = &row.values;
    let (w, fwd, bwd, scw, aw, nd) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    let mut out = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            out.push(format!("row {}: {what}", row.n));
        }
    };
    check((aw - nd).abs() <= AGREEMENT_TOL, format!("|AW - ND| = {:e}", (aw - nd).abs()));
    check(w <= fwd + ORDER_TOL, format!("W = {w} > CW_fwd = {fwd}"));
    check(w <= bwd + ORDER_TOL, format!("W = {w} > CW_bwd = {bwd}"));
    check(fwd <= aw + ORDER_TOL, format!("CW_fwd = {fwd} > AW = {aw}"));
    check(bwd <= aw + ORDER_TOL, format!("CW_bwd = {bwd} > AW = {aw}"));
    check(scw <= aw + ORDER_TOL, format!("SCW = {scw} > AW = {aw}"));
    out
}

fn compute_row(
    spec: &FamilySpec,
    n: usize,
    limit: &FiniteProcess,
    panel: &[(String, RewardSpec)],
    limit_values: &[f64],
) -> Result<ConvergenceRow> {
    let m = &spec.metric;
    let mu = make_family(spec, n)?;
    let w = wasserstein(&mu, limit, m)?;
    let (fwd, _) = causal_distance(&mu, limit, m)?;
    let (bwd, _) = causal_distance(limit, &mu, m)?;
    let (aw, _) = bicausal_distance_lp(&mu, limit, m)?;
    let (nd, _) = nested_distance(&mu, limit, m)?;
    let iw = hellwig_distance(&mu, limit, m)?;
    let aldous = aldous_distance(&mu, limit, m)?;
    let mut values = vec![w, fwd, bwd, fwd.max(bwd), aw, nd, iw, aldous];
    for ((_, reward), lim) in panel.iter().zip(limit_values) {
        let (v, _) = snell_value(&mu, &reward.evaluate(&mu, Convention::OneToN)?)?;
        values.push((v - lim).abs());
    }
    let origin = vec![StatePoint::new(vec![0.0; mu.dim()])?; mu.horizon()];
    values.push((mu.pth_moment(m, &origin)? - limit.pth_moment(m, &origin)?).abs());
    Ok(ConvergenceRow {
        n,
        eps: spec.epsilon(n),
        values,
    })
}

/// Runs `steps` members (`n = 0..steps`) of a family against its limit.
pub fn run_convergence(
    spec: &FamilySpec,
    steps: usize,
    panel: &[(String, RewardSpec)],
) -> Result<ConvergenceReport> {
    spec.validate()?;
    let limit = make_limit(spec)?;
    let limit_values = panel
        .iter()
        .map(|(_, r)| Ok(snell_value(&limit, &r.evaluate(&limit, Convention::OneToN)?)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let rows = (0..steps)
        .into_par_iter()
        .map(|n| compute_row(spec, n, &limit, panel, &limit_values))
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<String> = DISTANCE_COLUMNS.iter().map(|c| c.to_string()).collect();
    columns.extend(panel.iter().map(|(id, _)| id.clone()));
    columns.push("MOMENT_GAP".to_string());

    let series = |k: usize| rows.iter().map(|r| r.values[k]).collect::<Vec<f64>>();
    let vanishing: Vec<bool> = (0..columns.len()).map(|k| vanishes(&series(k))).collect();
    let mut violations: Vec<String> = rows.iter().flat_map(row_violations).collect();

    let aw_final = rows.last().map(|r| r.values[4]);
    let classification = match aw_final {
        Some(aw) if aw < ZERO_TOL => {
            // Adapted columns must follow AW to zero.
            let last = &rows[rows.len() - 1];
            for k in [3, 6, 7].into_iter().chain(8..8 + panel.len()) {
                if last.values[k] >= ADAPTED_TOL {
                    violations.push(format!(
                        "final {} = {} although AW vanished",
                        columns[k], last.values[k]
                    ));
                }
            }
            Classification::Adapted
        }
        Some(_) if vanishing[0] => Classification::WeakOnly,
        _ => Classification::None,
    };
    Ok(ConvergenceReport {
        family: spec.family.name().to_string(),
        p: spec.metric.p(),
        columns,
        rows,
        vanishing,
        classification,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_reveal_study() {
        let spec = FamilySpec::new(Family::EpsilonReveal);
        let panel = default_reward_panel(2);
        let rep = run_convergence(&spec, 3, &panel).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert_eq!(rep.classification, Classification::WeakOnly);
        for (row, eps) in rep.rows.iter().zip([1.0, 0.1, 0.01]) {
            assert!((row.values[0] - eps).abs() < 1e-9);
            assert!((row.values[4] - (1.0 + eps)).abs() < 1e-9);
            assert!((row.values[8] - 0.25).abs() < 1e-12);
        }
        let csv = rep.to_csv();
        assert!(csv.starts_with(
            "n,W,CW_fwd,CW_bwd,SCW,AW,ND,IW,ALDOUS,DV_panel,DV_lip1,DV_lip2,MOMENT_GAP\n"
        ));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn vanishing_noise_study() {
        let spec = FamilySpec::new(Family::VanishingNoise);
        let rep = run_convergence(&spec, 8, &default_reward_panel(2)).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert_eq!(rep.classification, Classification::Adapted);
        assert!(rep.vanishing.iter().all(|&v| v), "{:?}", rep.vanishing);
    }

    #[test]
    fn constant_and_empty_studies() {
        let spec = FamilySpec::new(Family::Constant(Box::new(epsilon_reveal(0.5))));
        let rep = run_convergence(&spec, 2, &default_reward_panel(2)).unwrap();
        assert!(rep.rows.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));
        let rep = run_convergence(&spec, 0, &[]).unwrap();
        assert!(rep.rows.is_empty());
        assert_eq!(rep.to_csv(), "n,W,CW_fwd,CW_bwd,SCW,AW,ND,IW,ALDOUS,MOMENT_GAP\n");
        assert_eq!(rep.classification, Classification::None);
    }

    #[test]
    fn binomial_study_converges() {
        let spec = FamilySpec::new(Family::BinomialPerturb { horizon: 3 });
        let rep = run_convergence(&spec, 4, &default_reward_panel(3)).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        let aw = rep.series("AW").unwrap();
        assert!(aw.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{aw:?}");
    }

    #[test]
    fn random_trees_are_reproducible() {
        let spec = RandomTreeSpec {
            horizon: 3,
            max_branching: 3,
            dim: 1,
        };
        let a = random_process(&mut ChaCha8Rng::seed_from_u64(7), spec);
        let b = random_process(&mut ChaCha8Rng::seed_from_u64(7), spec);
        assert_eq!(a, b);
        assert_eq!(a.horizon(), 3);
        assert!(crate::process::validate(&a, 1e-9).is_empty());
    }
}
