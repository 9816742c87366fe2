//! Hellwig information maps and Aldous prediction processes.
//!
//! Both topologies are metrized here. The information distance `IW_p` sums,
//! over split times `t = 1..N-1`, the one-period adapted distance between
//! the laws of `(X_{1..t}, law(X_{t+1..N} | X_{1..t}))`. The prediction
//! distance is `W_p` between the laws of `(X, Z_0, ..., Z_N)` with ground
//! cost `ρ(x, x')^p + Σ_t W_p(z_t, z'_t)^p`.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{check_compatible, Distribution, FiniteProcess, MetricSpec, NodeId, Path};
use crate::transport::{distribution_cost, solve_ot, TransportProblem};

/// One atom of an information image.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InformationAtom {
    pub prefix: Path,
    /// Law of the remaining coordinates given `prefix`.
    pub conditional: Distribution,
    pub weight: f64,
}

/// The law of `(X_{1..t}, law(X_{t+1..N} | X_{1..t}))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InformationImage {
    pub t: usize,
    pub atoms: Vec<InformationAtom>,
}

impl InformationImage {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Hellwig's information map `I_t` of a process, `1 ≤ t ≤ N-1`.
pub fn hellwig_map(proc: &FiniteProcess, t: usize) -> Result<InformationImage> {
    if t < 1 || t + 1 > proc.horizon() {
        return Err(Error::RangeOutOfBounds {
            from: t,
            to: t,
            horizon: proc.horizon(),
        });
    }
    let atoms = proc
        .level(t)
        .iter()
        .map(|&id| InformationAtom {
            prefix: proc.prefix(id),
            conditional: proc.conditional(id),
            weight: proc.node(id).mass,
        })
        .collect();
    Ok(InformationImage { t, atoms })
}

/// Per-split terms of `IW_p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HellwigReport {
    /// `AW_p^{(t)}` for `t = 1..N-1`.
    pub terms: Vec<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `IW_p` with its per-split terms.
pub fn hellwig_report(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<HellwigReport> {
    check_compatible(mu, nu)?;
    let n = mu.horizon();
    let terms = (1..n)
        .map(|t| {
            let a = hellwig_map(mu, t)?;
            let b = hellwig_map(nu, t)?;
            let wa: Vec<_> = a.atoms.iter().map(|x| (x, x.weight)).collect();
            let wb: Vec<_> = b.atoms.iter().map(|y| (y, y.weight)).collect();
            let prob = TransportProblem::from_fn(&wa, &wb, |x, y| {
                Ok(m.path_cost(&x.prefix, &y.prefix)?
                    + distribution_cost(&x.conditional, &y.conditional, m)?)
            })?;
            Ok(m.root(solve_ot(&prob)?.value))
        })
        .collect::<Result<Vec<f64>>>()?;
    let note = (n == 1).then(|| "N = 1: no split times, IW is 0 by convention".to_string());
    Ok(HellwigReport {
        value: terms.iter().sum(),
        terms,
        note,
    })
}

/// `IW_p(μ, ν)`.
pub fn hellwig_distance(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<f64> {
    Ok(hellwig_report(mu, nu, m)?.value)
}

/// The prediction process: for each node, the conditional law of the whole
/// path given the history up to that node.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionProcess {
    tree: FiniteProcess,
    z: Vec<Distribution>,
}

impl PredictionProcess {
    pub fn tree(&self) -> &FiniteProcess {
        &self.tree
    }

    /// `Z_t` at node `id` (with `t` the node's depth).
    pub fn z(&self, id: NodeId) -> &Distribution {
        &self.z[id]
    }

    /// Replaces `Z` at one node.
    pub fn set_z(&mut self, id: NodeId, law: Distribution) {
        self.z[id] = law;
    }

    /// `(Z_0, ..., Z_N)` along the path ending at `leaf`.
    pub fn trajectory(&self, leaf: NodeId) -> Vec<&Distribution> {
        (0..=self.tree.horizon())
            .map(|t| &self.z[self.tree.ancestor(leaf, t)])
            .collect()
    }

    /// JSON with one record per node: id, depth, parent, mass and `Z`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            id: NodeId,
            depth: usize,
            parent: Option<NodeId>,
            mass: f64,
            z: &'a Distribution,
        }
        let nodes: Vec<Record> = self
            .tree
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| Record {
                id,
                depth: n.depth,
                parent: n.parent,
                mass: n.mass,
                z: &self.z[id],
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "horizon": self.tree.horizon(),
            "nodes": nodes,
        }))
        .expect("serializable")
    }
}

/// Builds the prediction process of a tree.
pub fn prediction_process(proc: &FiniteProcess) -> PredictionProcess {
    let z = (0..proc.nodes().len())
        .map(|id| {
            let mass = proc.node(id).mass;
            Distribution::from_sorted_unchecked(
                proc.leaves_under(id)
                    .iter()
                    .map(|&l| (proc.prefix(l), proc.node(l).mass / mass))
                    .collect(),
            )
        })
        .collect();
    PredictionProcess {
        tree: proc.clone(),
        z,
    }
}

/// A node whose `Z` differs from the mixture of its children's.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleViolation {
    pub node: NodeId,
    pub depth: usize,
    /// Largest atom-wise difference.
    pub gap: f64,
}

/// Checks `Z_t(v) = Σ_c (mass(c) / mass(v)) Z_{t+1}(c)` at every internal
/// node.
pub fn martingale_check(pp: &PredictionProcess, tol: f64) -> Vec<MartingaleViolation> {
    let tree = &pp.tree;
    let mut out = Vec::new();
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let mut diff: BTreeMap<&Path, f64> = BTreeMap::new();
        for (path, w) in pp.z[id].atoms() {
            *diff.entry(path).or_insert(0.0) += w;
        }
        for &c in &node.children {
            let share = tree.node(c).mass / node.mass;
            for (path, w) in pp.z[c].atoms() {
                *diff.entry(path).or_insert(0.0) -= share * w;
            }
        }
        let gap = diff.values().fold(0.0f64, |g, d| g.max(d.abs()));
        if gap > tol {
            out.push(MartingaleViolation {
                node: id,
                depth: node.depth,
                gap,
            });
        }
    }
    out
}

/// `W_p^p(Z_t, Z'_t)` for all node pairs at depth `t`.
fn prediction_costs(
    a: &PredictionProcess,
    b: &PredictionProcess,
    m: &MetricSpec,
    t: usize,
) -> Result<Array2<f64>> {
    let xs = a.tree.level(t);
    let ys = b.tree.level(t);
    let values: Vec<f64> = (0..xs.len() * ys.len())
        .into_par_iter()
        .map(|k| distribution_cost(a.z(xs[k / ys.len()]), b.z(ys[k % ys.len()]), m))
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((xs.len(), ys.len()), values).expect("shape matches"))
}

/// Distance between the laws of `(X, Z_0, ..., Z_N)` under `μ` and `ν`.
pub fn aldous_distance(mu: &FiniteProcess, nu: &FiniteProcess, m: &MetricSpec) -> Result<f64> {
    check_compatible(mu, nu)?;
    let a = prediction_process(mu);
    let b = prediction_process(nu);
    let n = mu.horizon();
    let per_depth = (0..=n)
        .map(|t| prediction_costs(&a, &b, m, t))
        .collect::<Result<Vec<_>>>()?;
    let pos = |p: &FiniteProcess, t: usize, id: NodeId| {
        p.level(t).binary_search(&id).expect("ancestor is on its level")
    };
    let xs = mu.paths();
    let ys = nu.paths();
    let mut cost = Array2::zeros((xs.len(), ys.len()));
    for (i, &lx) in mu.leaves().iter().enumerate() {
        for (j, &ly) in nu.leaves().iter().enumerate() {
            let mut c = m.path_cost(&xs[i].0, &ys[j].0)?;
            for (t, table) in per_depth.iter().enumerate() {
                c += table[[pos(mu, t, mu.ancestor(lx, t)), pos(nu, t, nu.ancestor(ly, t))]];
            }
            cost[[i, j]] = c;
        }
    }
    let prob = TransportProblem::new(
        xs.iter().map(|x| x.1).collect(),
        ys.iter().map(|y| y.1).collect(),
        cost,
    )?;
    Ok(m.root(solve_ot(&prob)?.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{epsilon_limit, epsilon_reveal};
    use crate::process::{scalar_path, StatePoint, DEFAULT_TOL};

    fn m1() -> MetricSpec {
        MetricSpec::absolute(1.0)
    }

    #[test]
    fn hellwig_map_examples() {
        let img = hellwig_map(&epsilon_limit(), 1).unwrap();
        assert_eq!(img.atoms.len(), 1);
        assert_eq!(img.atoms[0].prefix, scalar_path(&[0.0]));
        assert_eq!(img.atoms[0].weight, 1.0);
        assert_eq!(
            img.atoms[0].conditional.atoms(),
            &[(scalar_path(&[-1.0]), 0.5), (scalar_path(&[1.0]), 0.5)]
        );
        let img = hellwig_map(&epsilon_reveal(0.1), 1).unwrap();
        assert_eq!(img.atoms.len(), 2);
        assert_eq!(img.atoms[0].prefix, scalar_path(&[-0.1]));
        assert_eq!(img.atoms[0].conditional.atoms(), &[(scalar_path(&[-1.0]), 1.0)]);
        assert_eq!(img.atoms[1].conditional.atoms(), &[(scalar_path(&[1.0]), 1.0)]);
        assert!(hellwig_map(&epsilon_limit(), 0).is_err());
        assert!(hellwig_map(&epsilon_limit(), 2).is_err());
    }

    #[test]
    fn markov_chain_conditionals_depend_on_last_state() {
        // Two-state chain started uniformly; transition depends on x_t only.
        let step = |x: f64| if x > 0.0 { [(1.0, 0.8), (-1.0, 0.2)] } else { [(1.0, 0.3), (-1.0, 0.7)] };
        let mut paths = vec![];
        for &x1 in &[-1.0, 1.0] {
            for (x2, p2) in step(x1) {
                for (x3, p3) in step(x2) {
                    paths.push((scalar_path(&[x1, x2, x3]), 0.5 * p2 * p3));
                }
            }
        }
        let chain = FiniteProcess::from_paths(&paths, DEFAULT_TOL).unwrap();
        let img = hellwig_map(&chain, 2).unwrap();
        for a in &img.atoms {
            for b in &img.atoms {
                if a.prefix[1] == b.prefix[1] {
                    for (pa, pb) in a.conditional.atoms().iter().zip(b.conditional.atoms()) {
                        assert_eq!(pa.0, pb.0);
                        assert!((pa.1 - pb.1).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn hellwig_distance_examples() {
        let mu = epsilon_reveal(0.1);
        let nu = epsilon_limit();
        let rep = hellwig_report(&mu, &nu, &m1()).unwrap();
        assert_eq!(rep.terms.len(), 1);
        assert!((rep.value - 1.1).abs() < 1e-12);
        assert_eq!(hellwig_distance(&mu, &mu, &m1()).unwrap(), 0.0);
        let one = FiniteProcess::dirac(scalar_path(&[0.0])).unwrap();
        let other = FiniteProcess::dirac(scalar_path(&[5.0])).unwrap();
        let rep = hellwig_report(&one, &other, &m1()).unwrap();
        assert_eq!(rep.value, 0.0);
        assert!(rep.note.is_some());
    }

    #[test]
    fn prediction_process_examples() {
        let nu = epsilon_limit();
        let pp = prediction_process(&nu);
        let node = nu.find_node(&scalar_path(&[0.0])).unwrap();
        assert_eq!(pp.z(node), &nu.marginal(1, 2).unwrap());
        assert_eq!(pp.z(0), &nu.marginal(1, 2).unwrap());
        let mu = epsilon_reveal(0.1);
        let pp = prediction_process(&mu);
        let node = mu.find_node(&scalar_path(&[0.1])).unwrap();
        assert_eq!(pp.z(node).atoms(), &[(scalar_path(&[0.1, 1.0]), 1.0)]);
        for &l in mu.leaves() {
            assert_eq!(pp.z(l).atoms(), &[(mu.prefix(l), 1.0)]);
            assert_eq!(pp.trajectory(l).len(), 3);
        }
        let det = FiniteProcess::dirac(scalar_path(&[1.0, 2.0])).unwrap();
        let pp = prediction_process(&det);
        for id in 0..det.nodes().len() {
            assert_eq!(pp.z(id).atoms(), &[(scalar_path(&[1.0, 2.0]), 1.0)]);
        }
    }

    #[test]
    fn martingale_property_and_corruption() {
        let mu = epsilon_reveal(0.1);
        let mut pp = prediction_process(&mu);
        assert!(martingale_check(&pp, 1e-12).is_empty());
        let node = mu.find_node(&scalar_path(&[0.1])).unwrap();
        let fake = Distribution::new(vec![
            (scalar_path(&[0.1, 1.0]), 0.5),
            (scalar_path(&[-0.1, -1.0]), 0.5),
        ])
        .unwrap();
        pp.set_z(node, fake);
        let bad = martingale_check(&pp, 1e-9);
        let nodes: Vec<_> = bad.iter().map(|v| v.node).collect();
        // The corrupted node breaks the root's identity and its own.
        assert!(nodes.contains(&0));
        assert!(nodes.contains(&node));
    }

    #[test]
    fn aldous_examples() {
        let mu = epsilon_reveal(0.1);
        let nu = epsilon_limit();
        assert!((aldous_distance(&mu, &nu, &m1()).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(aldous_distance(&mu, &mu, &m1()).unwrap(), 0.0);
        let x = FiniteProcess::dirac(vec![StatePoint::scalar(0.0)]).unwrap();
        let y = FiniteProcess::dirac(vec![StatePoint::scalar(2.0)]).unwrap();
        assert!((aldous_distance(&x, &y, &m1()).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn json_exports_parse() {
        let mu = epsilon_reveal(0.1);
        let v: serde_json::Value = serde_json::from_str(&prediction_process(&mu).to_json()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), mu.nodes().len());
        let v: serde_json::Value =
            serde_json::from_str(&hellwig_map(&mu, 1).unwrap().to_json()).unwrap();
        assert_eq!(v["t"], 1);
        assert_eq!(v["atoms"].as_array().unwrap().len(), 2);
    }
}
