//! Backward-recursive nested distance and the nested-distribution embedding.
//!
//! For node pairs `(a, b)` at depth `t` the value `V_t(a, b)` is the optimal
//! transport cost between the one-step kernels of `a` and `b`, where moving
//! child `x` to child `y` costs `ρ(x, y)^p + V_{t+1}(x, y)`. `V_N = 0` and
//! `ND_p = V_0(root, root)^{1/p}`.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{check_compatible, FiniteProcess, MetricSpec, NodeId, StatePoint};
use crate::transport::{solve_ot, TransportProblem};

/// `V_t` for every pair of nodes at every depth (stored as p-th powers).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    /// `values[t][[i, j]]` for the `i`-th node of `μ` and `j`-th node of `ν`
    /// at depth `t`.
    values: Vec<Array2<f64>>,
    x_ids: Vec<Vec<NodeId>>,
    y_ids: Vec<Vec<NodeId>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// All values at depth `t`, indexed by positions in the two levels.
    pub fn level(&self, t: usize) -> &Array2<f64> {
        &self.values[t]
    }

    /// `V_t(x, y)` by node ids, `None` if either node is not at depth `t`.
    pub fn get(&self, t: usize, x: NodeId, y: NodeId) -> Option<f64> {
        let i = self.x_ids.get(t)?.binary_search(&x).ok()?;
        let j = self.y_ids[t].binary_search(&y).ok()?;
        Some(self.values[t][[i, j]])
    }

    /// Overwrites one entry. Depths above `t` are left stale until
    /// [`ValueTable::recompute_below`] runs.
    pub fn set(&mut self, t: usize, x: NodeId, y: NodeId, value: f64) -> Result<()> {
        let i = self.x_ids[t]
            .binary_search(&x)
            .map_err(|_| Error::InvalidArgument(format!("node {x} is not at depth {t}")))?;
        let j = self.y_ids[t]
            .binary_search(&y)
            .map_err(|_| Error::InvalidArgument(format!("node {y} is not at depth {t}")))?;
        self.values[t][[i, j]] = value;
        Ok(())
    }

    /// `V_0(root, root) = ND_p^p`.
    pub fn root_value(&self) -> f64 {
        self.values[0][[0, 0]]
    }

    /// Re-runs the recursion for depths `t-1` down to `0` from the stored
    /// `V_t`, returning the new root value.
    pub fn recompute_below(
        &mut self,
        mu: &FiniteProcess,
        nu: &FiniteProcess,
        m: &MetricSpec,
        t: usize,
    ) -> Result<f64> {
        for s in (0..t.min(self.horizon())).rev() {
            self.values[s] = sweep(mu, nu, m, s, &self.values[s + 1])?;
        }
        Ok(self.root_value())
    }

    /// CSV with header `t,x_node,y_node,V`, deepest level first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x_node,y_node,V\n");
        for t in (0..self.values.len()).rev() {
            for (i, x) in self.x_ids[t].iter().enumerate() {
                for (j, y) in self.y_ids[t].iter().enumerate() {
                    let v = crate::format::sig12(self.values[t][[i, j]]);
                    let _ = writeln!(out, "{t},{x},{y},{v}");
                }
            }
        }
        out
    }
}

fn sweep(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
    t: usize,
    next: &Array2<f64>,
) -> Result<Array2<f64>> {
    let xs = mu.level(t);
    let ys = nu.level(t);
    let x_next = mu.level(t + 1);
    let y_next = nu.level(t + 1);
    let pos = |level: &[NodeId], id: NodeId| level.binary_search(&id).expect("child is one level down");
    let pairs: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..ys.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = mu.node(xs[i]);
            let b = nu.node(ys[j]);
            let kids_a: Vec<(NodeId, f64)> = a
                .children
                .iter()
                .map(|&c| (c, mu.node(c).mass / a.mass))
                .collect();
            let kids_b: Vec<(NodeId, f64)> = b
                .children
                .iter()
                .map(|&c| (c, nu.node(c).mass / b.mass))
                .collect();
            let prob = TransportProblem::from_fn(&kids_a, &kids_b, |&x, &y| {
                let sx = mu.node(x).state.as_ref().expect("child has a state");
                let sy = nu.node(y).state.as_ref().expect("child has a state");
                Ok(m.ground_cost(sx, sy)? + next[[pos(x_next, x), pos(y_next, y)]])
            })?;
            Ok(solve_ot(&prob)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((xs.len(), ys.len()), values).expect("shape matches"))
}

/// `ND_p(μ, ν)` and the full value table.
pub fn nested_distance(
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
) -> Result<(f64, ValueTable)> {
    check_compatible(mu, nu)?;
    let n = mu.horizon();
    let x_ids: Vec<Vec<NodeId>> = (0..=n).map(|t| mu.level(t).to_vec()).collect();
    let y_ids: Vec<Vec<NodeId>> = (0..=n).map(|t| nu.level(t).to_vec()).collect();
    let mut values: Vec<Array2<f64>> = (0..=n)
        .map(|t| Array2::zeros((x_ids[t].len(), y_ids[t].len())))
        .collect();
    for t in (0..n).rev() {
        values[t] = sweep(mu, nu, m, t, &values[t + 1])?;
    }
    let table = ValueTable {
        values,
        x_ids,
        y_ids,
    };
    Ok((m.root(table.root_value()), table))
}

/// One atom of a nested distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestedAtom {
    pub state: StatePoint,
    pub weight: f64,
    /// Law of what follows; `None` at the last period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child: Option<NestedDistribution>,
}

/// A law over `(state, nested law of the remainder)` pairs, `depth` levels
/// deep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestedDistribution {
    depth: usize,
    atoms: Vec<NestedAtom>,
}

impl NestedDistribution {
    /// Builds a level from its atoms, checking weights and depths.
    pub fn new(atoms: Vec<NestedAtom>) -> Result<Self> {
        let first = atoms.first().ok_or(Error::EmptyInput)?;
        let below = first.child.as_ref().map_or(0, |c| c.depth);
        let dim = first.state.dim();
        let mut total = 0.0;
        for (index, atom) in atoms.iter().enumerate() {
            if !(atom.weight > 0.0 && atom.weight.is_finite()) {
                return Err(Error::NonPositiveWeight {
                    index,
                    weight: atom.weight,
                });
            }
            if atom.state.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: atom.state.dim(),
                });
            }
            let d = atom.child.as_ref().map_or(0, |c| c.depth);
            if d != below {
                return Err(Error::HorizonMismatch {
                    left: below,
                    right: d,
                });
            }
            total += atom.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "nested level weights sum to {total}"
            )));
        }
        Ok(Self {
            depth: below + 1,
            atoms,
        })
    }

    /// Number of periods represented.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[NestedAtom] {
        &self.atoms
    }
}

/// The nested distribution `𝒩(μ)` of a process, built bottom-up.
pub fn nested_embedding(proc: &FiniteProcess) -> NestedDistribution {
    fn level(proc: &FiniteProcess, id: NodeId) -> NestedDistribution {
        let node = proc.node(id);
        let atoms = node
            .children
            .iter()
            .map(|&c| {
                let child = proc.node(c);
                NestedAtom {
                    state: child.state.clone().expect("child has a state"),
                    weight: child.mass / node.mass,
                    child: (!child.is_leaf()).then(|| level(proc, c)),
                }
            })
            .collect();
        NestedDistribution {
            depth: proc.horizon() - node.depth,
            atoms,
        }
    }
    level(proc, proc.root())
}

/// Interned copy of a nested distribution: structurally equal sub-laws
/// share one id.
#[derive(Default)]
struct Interner {
    ids: HashMap<Vec<(Vec<u64>, u64, usize)>, usize>,
    levels: Vec<Vec<(StatePoint, f64, usize)>>,
}

const NO_CHILD: usize = usize::MAX;

impl Interner {
    fn intern(&mut self, nd: &NestedDistribution) -> usize {
        let atoms: Vec<(StatePoint, f64, usize)> = nd
            .atoms
            .iter()
            .map(|a| {
                let child = a.child.as_ref().map_or(NO_CHILD, |c| self.intern(c));
                (a.state.clone(), a.weight, child)
            })
            .collect();
        let key = atoms
            .iter()
            .map(|(s, w, c)| (s.coords().iter().map(|x| x.to_bits()).collect(), w.to_bits(), *c))
            .collect();
        let next = self.levels.len();
        let id = *self.ids.entry(key).or_insert(next);
        if id == next {
            self.levels.push(atoms);
        }
        id
    }
}

/// Iterated Wasserstein distance between two nested distributions.
pub fn iterated_wasserstein(
    a: &NestedDistribution,
    b: &NestedDistribution,
    m: &MetricSpec,
) -> Result<f64> {
    if a.depth != b.depth {
        return Err(Error::HorizonMismatch {
            left: a.depth,
            right: b.depth,
        });
    }
    let mut interner = Interner::default();
    let ia = interner.intern(a);
    let ib = interner.intern(b);
    let mut memo = HashMap::new();
    Ok(m.root(iterated_pow(&interner, ia, ib, m, &mut memo)?))
}

fn iterated_pow(
    interner: &Interner,
    a: usize,
    b: usize,
    m: &MetricSpec,
    memo: &mut HashMap<(usize, usize), f64>,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if let Some(&v) = memo.get(&(a, b)) {
        return Ok(v);
    }
    let la = &interner.levels[a];
    let lb = &interner.levels[b];
    let mut cost = Array2::zeros((la.len(), lb.len()));
    for (i, (x, _, ca)) in la.iter().enumerate() {
        for (j, (y, _, cb)) in lb.iter().enumerate() {
            let inner = if *ca == NO_CHILD {
                0.0
            } else {
                iterated_pow(interner, *ca, *cb, m, memo)?
            };
            cost[[i, j]] = m.ground_cost(x, y)? + inner;
        }
    }
    let prob = TransportProblem::new(
        la.iter().map(|a| a.1).collect(),
        lb.iter().map(|b| b.1).collect(),
        cost,
    )?;
    let v = solve_ot(&prob)?.value;
    memo.insert((a, b), v);
    Ok(v)
}
