//! Optimal stopping on scenario trees.
//!
//! Rewards are attached to nodes, so adaptedness is structural. Values are
//! minimized (`v^L = inf_τ E[L_τ]`); a reward marked `maximize` is negated
//! internally and the returned value is the supremum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::causal::{check_causality, Coupling, Direction, CAUSALITY_TOL};
use crate::error::{Error, Result};
use crate::process::{FiniteProcess, NodeId, Path, StatePoint};

/// Which times may be chosen by a stopping rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `τ ∈ {1, ..., N}`; no reward at the root.
    #[default]
    #[serde(rename = "1..N")]
    OneToN,
    /// `τ ∈ {0, ..., N}`.
    #[serde(rename = "0..N")]
    ZeroToN,
}

impl Convention {
    /// Earliest admissible stopping time.
    pub fn first(self) -> usize {
        match self {
            Convention::OneToN => 1,
            Convention::ZeroToN => 0,
        }
    }
}

/// Reward values `L_t` attached to the nodes of one tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewardProcess {
    pub convention: Convention,
    /// Indexed by node id. The root entry is ignored under `1..N`.
    values: Vec<f64>,
    /// Known Lipschitz constant with respect to the `ℓ¹` path metric.
    pub lipschitz: Option<f64>,
    pub maximize: bool,
}

impl RewardProcess {
    /// Evaluates `f` on every node prefix.
    pub fn from_fn(
        proc: &FiniteProcess,
        convention: Convention,
        mut f: impl FnMut(&[StatePoint]) -> Result<f64>,
    ) -> Result<Self> {
        let mut values = vec![0.0; proc.nodes().len()];
        for (id, node) in proc.nodes().iter().enumerate() {
            if node.depth < convention.first() {
                continue;
            }
            let v = f(&proc.prefix(id))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("reward at node {id}")));
            }
            values[id] = v;
        }
        Ok(Self {
            convention,
            values,
            lipschitz: None,
            maximize: false,
        })
    }

    /// `L_t(x) = c` for every admissible `t`.
    pub fn constant(proc: &FiniteProcess, convention: Convention, c: f64) -> Result<Self> {
        let mut r = Self::from_fn(proc, convention, |_| Ok(c))?;
        r.lipschitz = Some(0.0);
        Ok(r)
    }

    pub fn with_lipschitz(mut self, c: Option<f64>) -> Self {
        self.lipschitz = c;
        self
    }

    pub fn with_maximize(mut self, maximize: bool) -> Self {
        self.maximize = maximize;
        self
    }

    /// Reward at node `id` as supplied.
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id]
    }

    /// Reward as minimized.
    fn effective(&self, id: NodeId) -> f64 {
        if self.maximize {
            -self.values[id]
        } else {
            self.values[id]
        }
    }

    fn check_tree(&self, proc: &FiniteProcess) -> Result<()> {
        if self.values.len() != proc.nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "reward has {} node values, tree has {} nodes",
                self.values.len(),
                proc.nodes().len()
            )));
        }
        Ok(())
    }
}

/// A deterministic stopping rule: stop at the first node on the path whose
/// flag is set. Leaves always stop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoppingRule {
    stop: Vec<bool>,
}

impl StoppingRule {
    /// Builds a rule from per-node flags; leaf flags are forced on.
    pub fn new(proc: &FiniteProcess, mut stop: Vec<bool>) -> Result<Self> {
        if stop.len() != proc.nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "rule has {} flags, tree has {} nodes",
                stop.len(),
                proc.nodes().len()
            )));
        }
        for &l in proc.leaves() {
            stop[l] = true;
        }
        Ok(Self { stop })
    }

    /// Stop at the first node where `f` holds.
    pub fn from_fn(proc: &FiniteProcess, f: impl Fn(NodeId) -> bool) -> Self {
        let stop = (0..proc.nodes().len())
            .map(|id| f(id) || proc.node(id).is_leaf())
            .collect();
        Self { stop }
    }

    /// `τ ≡ t` (paths shorter than `t` do not exist).
    pub fn at_time(proc: &FiniteProcess, t: usize) -> Self {
        Self::from_fn(proc, |id| proc.node(id).depth >= t)
    }

    pub fn stops_at(&self, id: NodeId) -> bool {
        self.stop[id]
    }

    /// Node at which the path ending at `leaf` is stopped.
    pub fn stopping_node(&self, proc: &FiniteProcess, leaf: NodeId) -> NodeId {
        (0..=proc.horizon())
            .map(|t| proc.ancestor(leaf, t))
            .find(|&a| self.stop[a])
            .unwrap_or(leaf)
    }

    /// `τ` on the path ending at `leaf`.
    pub fn stopping_time(&self, proc: &FiniteProcess, leaf: NodeId) -> usize {
        proc.node(self.stopping_node(proc, leaf)).depth
    }

    /// `E[L_τ]` under the tree's own law.
    pub fn expected_reward(&self, proc: &FiniteProcess, reward: &RewardProcess) -> f64 {
        proc.leaves()
            .iter()
            .map(|&l| proc.node(l).mass * reward.value(self.stopping_node(proc, l)))
            .sum()
    }

    fn respects(&self, convention: Convention) -> bool {
        convention == Convention::ZeroToN || !self.stop[0]
    }
}

/// Snell envelope by backward induction; stops on ties.
pub fn snell_value(proc: &FiniteProcess, reward: &RewardProcess) -> Result<(f64, StoppingRule)> {
    reward.check_tree(proc)?;
    let first = reward.convention.first();
    let mut v = vec![0.0; proc.nodes().len()];
    let mut stop = vec![false; proc.nodes().len()];
    for t in (0..=proc.horizon()).rev() {
        for &id in proc.level(t) {
            let node = proc.node(id);
            if node.is_leaf() {
                v[id] = reward.effective(id);
                stop[id] = true;
                continue;
            }
            let cont: f64 = node
                .children
                .iter()
                .map(|&c| proc.node(c).mass / node.mass * v[c])
                .sum();
            if t >= first && reward.effective(id) <= cont {
                v[id] = reward.effective(id);
                stop[id] = true;
            } else {
                v[id] = cont;
            }
        }
    }
    let value = if reward.maximize { -v[0] } else { v[0] };
    Ok((value, StoppingRule { stop }))
}

/// Largest number of decision nodes accepted by
/// [`enumerate_stopping_values`].
pub const ENUMERATION_CAP: usize = 20;

/// Best value over every deterministic rule, by exhaustive enumeration.
pub fn enumerate_stopping_values(proc: &FiniteProcess, reward: &RewardProcess) -> Result<f64> {
    reward.check_tree(proc)?;
    let first = reward.convention.first();
    let decisions: Vec<NodeId> = (0..proc.nodes().len())
        .filter(|&id| !proc.node(id).is_leaf() && proc.node(id).depth >= first)
        .collect();
    if decisions.len() > ENUMERATION_CAP {
        return Err(Error::InstanceTooLarge {
            what: "stopping-rule enumeration",
            size: decisions.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let slot: BTreeMap<NodeId, usize> = decisions.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    // Per leaf: (mass, decision slots along the path with their rewards, leaf reward).
    let chains: Vec<(f64, Vec<(usize, f64)>, f64)> = proc
        .leaves()
        .iter()
        .map(|&l| {
            let chain = (0..proc.horizon())
                .map(|t| proc.ancestor(l, t))
                .filter_map(|a| slot.get(&a).map(|&k| (k, reward.effective(a))))
                .collect();
            (proc.node(l).mass, chain, reward.effective(l))
        })
        .collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << decisions.len()) {
        let total: f64 = chains
            .iter()
            .map(|(w, chain, last)| {
                let r = chain
                    .iter()
                    .find(|(k, _)| mask >> k & 1 == 1)
                    .map_or(*last, |&(_, r)| r);
                w * r
            })
            .sum();
        best = best.min(total);
    }
    Ok(if reward.maximize { -best } else { best })
}

fn admissible_times(horizon: usize, convention: Convention) -> std::ops::RangeInclusive<usize> {
    convention.first()..=horizon
}

/// `E_π[max_t |L_t(X) - L_t(Y)|]` for a bicausal plan `π`.
pub fn stability_bound(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    l_mu: &RewardProcess,
    l_nu: &RewardProcess,
    plan: &Coupling,
) -> Result<f64> {
    l_mu.check_tree(mu)?;
    l_nu.check_tree(nu)?;
    if l_mu.convention != l_nu.convention {
        return Err(Error::InvalidArgument("rewards use different conventions".into()));
    }
    let bad = check_causality(plan, mu, nu, Direction::Bicausal, CAUSALITY_TOL);
    if !bad.is_empty() {
        return Err(Error::NotCausal(bad.len()));
    }
    let mut total = 0.0;
    for (i, &x) in mu.leaves().iter().enumerate() {
        for (j, &y) in nu.leaves().iter().enumerate() {
            let w = plan.plan[[i, j]];
            if w == 0.0 {
                continue;
            }
            let gap = admissible_times(mu.horizon(), l_mu.convention)
                .map(|t| (l_mu.value(mu.ancestor(x, t)) - l_nu.value(nu.ancestor(y, t))).abs())
                .fold(0.0, f64::max);
            total += w * gap;
        }
    }
    Ok(total)
}

/// A stopping rule driven by an external uniform `u`:
/// `σ(x, u) = inf{t : F_t(x_{1..t}) ≥ u}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomizedStoppingRule {
    /// `F` per node; 1 at leaves, 0 at inadmissible nodes.
    pub profile: Vec<f64>,
}

impl RandomizedStoppingRule {
    /// The deterministic rule `σ(·, u)`.
    pub fn at(&self, u: f64) -> StoppingRule {
        StoppingRule {
            stop: self.profile.iter().map(|&f| f >= u).collect(),
        }
    }

    /// Distinct values of `F` strictly inside `(0, 1)`, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .profile
            .iter()
            .copied()
            .filter(|&f| f > 0.0 && f < 1.0)
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫₀¹ E[L_{σ(X, u)}(X)] du`, summed exactly over breakpoint intervals.
    pub fn expected_reward(&self, proc: &FiniteProcess, reward: &RewardProcess) -> f64 {
        let mut cuts = vec![0.0];
        cuts.extend(self.breakpoints());
        cuts.push(1.0);
        cuts.windows(2)
            .map(|w| (w[1] - w[0]) * self.at(0.5 * (w[0] + w[1])).expected_reward(proc, reward))
            .sum()
    }
}

/// Result of [`transport_stopping_time`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportedStopping {
    pub rule: RandomizedStoppingRule,
    /// `∫₀¹ E_μ[L_{σ(X, u)}(X)] du`.
    pub value: f64,
    /// `E_π[L_{τ(Y)}(X)]`.
    pub direct: f64,
}

/// Moves a stopping rule `τ` on `ν` to a randomized rule on `μ` along a
/// plan causal from `μ` to `ν`.
pub fn transport_stopping_time(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    tau: &StoppingRule,
    plan: &Coupling,
    l_mu: &RewardProcess,
) -> Result<TransportedStopping> {
    l_mu.check_tree(mu)?;
    if tau.stop.len() != nu.nodes().len() {
        return Err(Error::InvalidArgument("stopping rule does not match ν".into()));
    }
    if !tau.respects(l_mu.convention) {
        return Err(Error::InvalidArgument(
            "stopping rule stops at 0 under the 1..N convention".into(),
        ));
    }
    let bad = check_causality(plan, mu, nu, Direction::Forward, CAUSALITY_TOL);
    if !bad.is_empty() {
        return Err(Error::NotCausal(bad.len()));
    }
    let tau_y: Vec<usize> = nu.leaves().iter().map(|&l| tau.stopping_time(nu, l)).collect();
    let mut profile = vec![0.0; mu.nodes().len()];
    for (id, node) in mu.nodes().iter().enumerate() {
        if node.is_leaf() {
            profile[id] = 1.0;
            continue;
        }
        if node.depth < l_mu.convention.first() {
            continue;
        }
        let mut mass = 0.0;
        for i in node.leaf_range.clone() {
            for (j, &t) in tau_y.iter().enumerate() {
                if t <= node.depth {
                    mass += plan.plan[[i, j]];
                }
            }
        }
        profile[id] = mass / node.mass;
    }
    let rule = RandomizedStoppingRule { profile };
    let value = rule.expected_reward(mu, l_mu);
    let mut direct = 0.0;
    for (i, &x) in mu.leaves().iter().enumerate() {
        for (j, &t) in tau_y.iter().enumerate() {
            direct += plan.plan[[i, j]] * l_mu.value(mu.ancestor(x, t));
        }
    }
    Ok(TransportedStopping {
        rule,
        value,
        direct,
    })
}

/// A reward functional that can be evaluated on any tree.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardSpec {
    /// `L_t ≡ c`.
    Constant { c: f64 },
    /// `L_t(x) = x_t[coord]`.
    Coordinate { coord: usize },
    /// `L_t(x) = clip(a_t + Σ_{s ≤ t} b_{t,s} Σ_k x_s[k], lo, hi)`; `a` and
    /// `b` are indexed from the first admissible time.
    ClippedLinear {
        intercept: Vec<f64>,
        coef: Vec<Vec<f64>>,
        lo: f64,
        hi: f64,
    },
    /// `L_t ≡ ½` for `t < N`, `L_N(x) = clip((x_N + 1) / 2, 0, 1)`.
    Panel,
    /// Per-prefix values.
    Table(Vec<(Path, f64)>),
}

impl RewardSpec {
    /// The stopping panel reward; for `N = 2` it is `L_1 ≡ ½`,
    /// `L_2(x) = clip((x_2 + 1) / 2, 0, 1)`.
    pub fn panel() -> Self {
        RewardSpec::Panel
    }

    /// Lipschitz constant with respect to the `ℓ¹` path metric, if known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            RewardSpec::Constant { .. } => Some(0.0),
            RewardSpec::Coordinate { .. } => Some(1.0),
            RewardSpec::Panel => Some(0.5),
            RewardSpec::ClippedLinear { coef, .. } => Some(
                coef.iter()
                    .flatten()
                    .fold(0.0, |c: f64, b| c.max(b.abs())),
            ),
            RewardSpec::Table(_) => None,
        }
    }

    /// Builds from a family name and JSON parameters.
    pub fn from_family(name: &str, params: &serde_json::Value) -> Result<Self> {
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.get(key) {
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| Error::Parse(format!("parameter {key} must be a number"))),
                None => default.ok_or_else(|| Error::Parse(format!("missing parameter {key}"))),
            }
        };
        match name {
            "constant" => Ok(RewardSpec::Constant { c: num("c", None)? }),
            "coordinate" => Ok(RewardSpec::Coordinate {
                coord: num("coord", Some(0.0))? as usize,
            }),
            "clipped_linear" => {
                let intercept: Vec<f64> = serde_json::from_value(
                    params.get("intercept").cloned().unwrap_or_default(),
                )?;
                let coef: Vec<Vec<f64>> =
                    serde_json::from_value(params.get("coef").cloned().unwrap_or_default())?;
                let lo = num("lo", Some(f64::NEG_INFINITY))?;
                let hi = num("hi", Some(f64::INFINITY))?;
                if lo > hi {
                    return Err(Error::Parse("lo exceeds hi".into()));
                }
                Ok(RewardSpec::ClippedLinear {
                    intercept,
                    coef,
                    lo,
                    hi,
                })
            }
            "panel" => Ok(RewardSpec::panel()),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    /// Evaluates the functional on every node of `proc`.
    pub fn evaluate(&self, proc: &FiniteProcess, convention: Convention) -> Result<RewardProcess> {
        let first = convention.first();
        let horizon = proc.horizon();
        let r = RewardProcess::from_fn(proc, convention, |prefix| {
            let t = prefix.len();
            match self {
                RewardSpec::Constant { c } => Ok(*c),
                RewardSpec::Panel if t < horizon => Ok(0.5),
                RewardSpec::Panel => {
                    let x: f64 = prefix[t - 1].coords().iter().sum();
                    Ok(((x + 1.0) / 2.0).clamp(0.0, 1.0))
                }
                RewardSpec::Coordinate { coord } => {
                    let x = prefix.last().ok_or(Error::MissingReward { depth: 0 })?;
                    x.coords().get(*coord).copied().ok_or(Error::DimensionMismatch {
                        expected: coord + 1,
                        found: x.dim(),
                    })
                }
                RewardSpec::ClippedLinear {
                    intercept,
                    coef,
                    lo,
                    hi,
                } => {
                    let k = t - first;
                    let a = *intercept.get(k).ok_or(Error::MissingReward { depth: t })?;
                    let b = coef.get(k).map(Vec::as_slice).unwrap_or(&[]);
                    let lin: f64 = b
                        .iter()
                        .zip(prefix)
                        .map(|(b, x)| b * x.coords().iter().sum::<f64>())
                        .sum();
                    Ok((a + lin).clamp(*lo, *hi))
                }
                RewardSpec::Table(entries) => entries
                    .iter()
                    .find(|(p, _)| p.as_slice() == prefix)
                    .map(|e| e.1)
                    .ok_or(Error::MissingReward { depth: t }),
            }
        })?;
        Ok(r.with_lipschitz(self.lipschitz()))
    }
}

/// One entry of a per-prefix reward file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub prefix: Vec<Vec<f64>>,
    pub value: f64,
}

/// Reward file: either a per-prefix table or a named family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardFile {
    Table {
        #[serde(default)]
        convention: Convention,
        values: Vec<RewardEntry>,
        #[serde(default)]
        maximize: bool,
    },
    Family {
        family: String,
        #[serde(default)]
        params: serde_json::Value,
        #[serde(default)]
        convention: Convention,
        #[serde(default)]
        maximize: bool,
    },
}

impl RewardFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn convention(&self) -> Convention {
        match self {
            RewardFile::Table { convention, .. } | RewardFile::Family { convention, .. } => {
                *convention
            }
        }
    }

    pub fn maximize(&self) -> bool {
        match self {
            RewardFile::Table { maximize, .. } | RewardFile::Family { maximize, .. } => *maximize,
        }
    }

    pub fn spec(&self) -> Result<RewardSpec> {
        match self {
            RewardFile::Table { values, .. } => {
                let entries = values
                    .iter()
                    .map(|e| {
                        let path = e
                            .prefix
                            .iter()
                            .map(|x| StatePoint::new(x.clone()))
                            .collect::<Result<Path>>()?;
                        Ok((path, e.value))
                    })
                    .collect::<Result<_>>()?;
                Ok(RewardSpec::Table(entries))
            }
            RewardFile::Family { family, params, .. } => RewardSpec::from_family(family, params),
        }
    }

    /// The reward evaluated on `proc`.
    pub fn evaluate(&self, proc: &FiniteProcess) -> Result<RewardProcess> {
        Ok(self
            .spec()?
            .evaluate(proc, self.convention())?
            .with_maximize(self.maximize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::bicausal_distance_lp;
    use crate::experiments::{epsilon_limit, epsilon_reveal};
    use crate::process::{scalar_path, MetricSpec, DEFAULT_TOL};

    fn panel(proc: &FiniteProcess) -> RewardProcess {
        RewardSpec::panel().evaluate(proc, Convention::OneToN).unwrap()
    }

    #[test]
    fn panel_values() {
        let nu = epsilon_limit();
        let (v, rule) = snell_value(&nu, &panel(&nu)).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        // Tie at (0): stop.
        assert!(rule.stops_at(nu.find_node(&scalar_path(&[0.0])).unwrap()));
        assert!(!rule.stops_at(0));
        let mu = epsilon_reveal(0.1);
        let (v, rule) = snell_value(&mu, &panel(&mu)).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        // Stop where the continuation would pay 1, go on where it pays 0.
        assert!(rule.stops_at(mu.find_node(&scalar_path(&[0.1])).unwrap()));
        assert!(!rule.stops_at(mu.find_node(&scalar_path(&[-0.1])).unwrap()));
        assert!((enumerate_stopping_values(&nu, &panel(&nu)).unwrap() - 0.5).abs() < 1e-12);
        assert!((enumerate_stopping_values(&mu, &panel(&mu)).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_reward() {
        let mu = epsilon_reveal(0.3);
        for conv in [Convention::OneToN, Convention::ZeroToN] {
            let r = RewardProcess::constant(&mu, conv, 2.5).unwrap();
            assert_eq!(snell_value(&mu, &r).unwrap().0, 2.5);
            assert_eq!(enumerate_stopping_values(&mu, &r).unwrap(), 2.5);
        }
    }

    #[test]
    fn single_path_takes_the_minimum() {
        let p = FiniteProcess::dirac(scalar_path(&[3.0, -1.0, 2.0])).unwrap();
        let r = RewardSpec::Coordinate { coord: 0 }
            .evaluate(&p, Convention::OneToN)
            .unwrap();
        assert_eq!(snell_value(&p, &r).unwrap().0, -1.0);
        assert_eq!(enumerate_stopping_values(&p, &r).unwrap(), -1.0);
        let max = r.with_maximize(true);
        assert_eq!(snell_value(&p, &max).unwrap().0, 3.0);
        assert_eq!(enumerate_stopping_values(&p, &max).unwrap(), 3.0);
    }

    #[test]
    fn zero_convention_allows_stopping_at_the_root() {
        let mu = epsilon_reveal(0.1);
        let r = RewardProcess::from_fn(&mu, Convention::ZeroToN, |prefix| {
            Ok(if prefix.is_empty() { -1.0 } else { 0.0 })
        })
        .unwrap();
        let (v, rule) = snell_value(&mu, &r).unwrap();
        assert_eq!(v, -1.0);
        assert!(rule.stops_at(0));
    }

    #[test]
    fn enumeration_cap() {
        let paths: Vec<_> = (0..21)
            .map(|k| (scalar_path(&[k as f64, 0.0]), 1.0))
            .collect();
        let p = FiniteProcess::from_paths(&paths, DEFAULT_TOL).unwrap();
        let r = RewardProcess::constant(&p, Convention::OneToN, 0.0).unwrap();
        assert!(matches!(
            enumerate_stopping_values(&p, &r),
            Err(Error::InstanceTooLarge { size: 21, .. })
        ));
    }

    #[test]
    fn missing_table_entry() {
        let nu = epsilon_limit();
        let spec = RewardSpec::Table(vec![(scalar_path(&[0.0]), 0.5)]);
        assert!(matches!(
            spec.evaluate(&nu, Convention::OneToN),
            Err(Error::MissingReward { depth: 2 })
        ));
    }

    #[test]
    fn stability_on_the_example() {
        let m = MetricSpec::absolute(1.0);
        let mu = epsilon_reveal(0.1);
        let nu = epsilon_limit();
        let (lm, ln) = (panel(&mu), panel(&nu));
        let (_, plan) = bicausal_distance_lp(&mu, &nu, &m).unwrap();
        let bound = stability_bound(&mu, &nu, &lm, &ln, &plan).unwrap();
        assert!(0.25 <= bound + 1e-9);
        let prod = Coupling::product(&mu, &nu, &m).unwrap();
        assert!((stability_bound(&mu, &nu, &lm, &ln, &prod).unwrap() - 0.5).abs() < 1e-12);
        let id = Coupling::identity(&mu, &m).unwrap();
        assert_eq!(stability_bound(&mu, &mu, &lm, &lm, &id).unwrap(), 0.0);
        // The sign-matched plan is only causal one way.
        let matched = Coupling::new(ndarray::array![[0.5, 0.0], [0.0, 0.5]], &mu, &nu, &m).unwrap();
        assert!(matches!(
            stability_bound(&mu, &nu, &lm, &ln, &matched),
            Err(Error::NotCausal(_))
        ));
    }

    #[test]
    fn transported_rules() {
        let m = MetricSpec::absolute(1.0);
        let mu = epsilon_reveal(0.1);
        let nu = epsilon_limit();
        let lm = panel(&mu);
        let (_, plan) = bicausal_distance_lp(&mu, &nu, &m).unwrap();
        let zero = nu.find_node(&scalar_path(&[0.0])).unwrap();
        let tau = StoppingRule::from_fn(&nu, |id| id == zero);
        let out = transport_stopping_time(&mu, &nu, &tau, &plan, &lm).unwrap();
        assert!((out.value - out.direct).abs() < 1e-12);
        assert!((out.value - 0.5).abs() < 1e-12);
        // Identity plan reproduces τ.
        let id = Coupling::identity(&mu, &m).unwrap();
        let tau = snell_value(&mu, &lm).unwrap().1;
        let out = transport_stopping_time(&mu, &mu, &tau, &id, &lm).unwrap();
        assert!((out.value - 0.25).abs() < 1e-12);
        assert_eq!(out.rule.at(0.5), tau);
    }

    #[test]
    fn transport_of_stop_at_zero() {
        let m = MetricSpec::absolute(1.0);
        let mu = epsilon_reveal(0.1);
        let nu = epsilon_limit();
        let l0 = RewardProcess::from_fn(&mu, Convention::ZeroToN, |p| Ok(p.len() as f64 + 0.5))
            .unwrap();
        let tau = StoppingRule::at_time(&nu, 0);
        let plan = Coupling::product(&mu, &nu, &m).unwrap();
        let out = transport_stopping_time(&mu, &nu, &tau, &plan, &l0).unwrap();
        assert!(out.rule.at(0.3).stops_at(0));
        assert_eq!(out.value, 0.5);
        assert_eq!(out.direct, 0.5);
        // Under 1..N the same rule is rejected.
        assert!(transport_stopping_time(&mu, &nu, &tau, &plan, &panel(&mu)).is_err());
    }

    #[test]
    fn transport_requires_causality() {
        let m = MetricSpec::absolute(1.0);
        let mu = epsilon_limit();
        let nu = epsilon_reveal(0.1);
        // Coupling matching the second coordinate: not causal from the limit.
        let plan = Coupling::new(ndarray::array![[0.5, 0.0], [0.0, 0.5]], &mu, &nu, &m).unwrap();
        let tau = StoppingRule::at_time(&nu, 1);
        assert!(matches!(
            transport_stopping_time(&mu, &nu, &tau, &plan, &panel(&mu)),
            Err(Error::NotCausal(_))
        ));
    }

    #[test]
    fn reward_files() {
        let nu = epsilon_limit();
        let f = RewardFile::parse(r#"{"family": "panel"}"#).unwrap();
        let (v, _) = snell_value(&nu, &f.evaluate(&nu).unwrap()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let f = RewardFile::parse(
            r#"{"convention": "1..N", "values": [
                {"prefix": [[0]], "value": 0.5},
                {"prefix": [[0], [-1]], "value": 0},
                {"prefix": [[0], [1]], "value": 1}
            ]}"#,
        )
        .unwrap();
        assert_eq!(f.convention(), Convention::OneToN);
        let (v, _) = snell_value(&nu, &f.evaluate(&nu).unwrap()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let f = RewardFile::parse(r#"{"family": "constant", "params": {"c": 3}, "convention": "0..N"}"#)
            .unwrap();
        assert_eq!(snell_value(&nu, &f.evaluate(&nu).unwrap()).unwrap().0, 3.0);
        let f = RewardFile::parse(r#"{"family": "nope"}"#).unwrap();
        assert!(matches!(f.evaluate(&nu), Err(Error::UnknownFamily(_))));
        assert!(RewardFile::parse(r#"{"values": 3}"#).is_err());
    }
}
