//! Finite-support laws of discrete-time processes, stored as scenario trees.
//!
//! A [`FiniteProcess`] is the canonical prefix tree of a finite list of
//! weighted paths. Node `0` is the root (depth 0, no state); every node at
//! depth `t` carries the state `x_t` of its prefix and the mass of all paths
//! through it. Nodes are numbered level by level, and within a level in
//! lexicographic order of their prefixes, so leaves under any node form a
//! contiguous block of [`FiniteProcess::leaves`].

mod distribution;
mod metric;
mod point;
mod validate;

use std::collections::BTreeMap;
use std::ops::Range;

pub use distribution::Distribution;
pub use metric::{DistanceTable, Ground, MetricBlock, MetricSpec};
pub use point::{scalar_path, Path, StatePoint};
pub use validate::{validate, Violation};

use crate::error::{Error, Result};

/// Default tolerance for consistency checks.
pub const DEFAULT_TOL: f64 = 1e-9;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub depth: usize,
    /// `None` only at the root.
    pub state: Option<StatePoint>,
    pub mass: f64,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Positions of this node's leaves in [`FiniteProcess::leaves`].
    pub leaf_range: Range<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Ingestion options for [`FiniteProcess::from_paths_with`].
#[derive(Clone, Copy, Debug)]
pub struct IngestOptions {
    /// Relative tolerance used when normalizing weights.
    pub tol: f64,
    /// Snap coordinates to multiples of this grid before merging atoms.
    pub quantum: Option<f64>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            quantum: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteProcess {
    horizon: usize,
    dim: usize,
    nodes: Vec<Node>,
    levels: Vec<Vec<NodeId>>,
    leaves: Vec<NodeId>,
}

impl FiniteProcess {
    /// Builds the scenario tree of a weighted path list.
    ///
    /// Weights are normalized to sum to one and identical paths are merged.
    pub fn from_paths(paths: &[(Path, f64)], tol: f64) -> Result<Self> {
        Self::from_paths_with(
            paths,
            IngestOptions {
                tol,
                quantum: None,
            },
        )
    }

    pub fn from_paths_with(paths: &[(Path, f64)], opts: IngestOptions) -> Result<Self> {
        let (first, _) = paths.first().ok_or(Error::EmptyInput)?;
        let horizon = first.len();
        if horizon == 0 {
            return Err(Error::RaggedPaths {
                index: 0,
                expected: 1,
                found: 0,
            });
        }
        let dim = first[0].dim();
        let mut merged: BTreeMap<Path, f64> = BTreeMap::new();
        let mut total = 0.0;
        for (index, (path, weight)) in paths.iter().enumerate() {
            if path.len() != horizon {
                return Err(Error::RaggedPaths {
                    index,
                    expected: horizon,
                    found: path.len(),
                });
            }
            if let Some(bad) = path.iter().find(|x| x.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.dim(),
                });
            }
            if !weight.is_finite() {
                return Err(Error::NonFinite(format!("weight of path {index}")));
            }
            if *weight <= 0.0 {
                return Err(Error::NonPositiveWeight {
                    index,
                    weight: *weight,
                });
            }
            let key = match opts.quantum {
                Some(q) => path.iter().map(|x| x.quantized(q)).collect(),
                None => path.clone(),
            };
            *merged.entry(key).or_insert(0.0) += weight;
            total += weight;
        }
        let _ = opts.tol;
        let normalized: Vec<(Path, f64)> =
            merged.into_iter().map(|(p, w)| (p, w / total)).collect();
        Ok(Self::build_tree(horizon, dim, &normalized))
    }

    /// `paths` must be sorted, deduplicated and normalized.
    fn build_tree(horizon: usize, dim: usize, paths: &[(Path, f64)]) -> Self {
        let mut nodes = vec![Node {
            depth: 0,
            state: None,
            mass: 0.0,
            parent: None,
            children: Vec::new(),
            leaf_range: 0..paths.len(),
        }];
        let mut levels = vec![vec![0]];
        // Each entry: (node id, range of paths through it).
        let mut frontier: Vec<(NodeId, Range<usize>)> = vec![(0, 0..paths.len())];
        for depth in 1..=horizon {
            let mut next = Vec::new();
            let mut level = Vec::new();
            for (parent, range) in frontier {
                let mut start = range.start;
                while start < range.end {
                    let state = &paths[start].0[depth - 1];
                    let mut end = start + 1;
                    while end < range.end && &paths[end].0[depth - 1] == state {
                        end += 1;
                    }
                    let id = nodes.len();
                    nodes.push(Node {
                        depth,
                        state: Some(state.clone()),
                        mass: 0.0,
                        parent: Some(parent),
                        children: Vec::new(),
                        leaf_range: start..end,
                    });
                    nodes[parent].children.push(id);
                    level.push(id);
                    next.push((id, start..end));
                    start = end;
                }
            }
            levels.push(level);
            frontier = next;
        }
        let leaves = levels[horizon].clone();
        for (k, &leaf) in leaves.iter().enumerate() {
            nodes[leaf].mass = paths[k].1;
        }
        for depth in (0..horizon).rev() {
            for &id in &levels[depth] {
                let mass = nodes[id].children.iter().map(|&c| nodes[c].mass).sum();
                nodes[id].mass = mass;
            }
        }
        Self {
            horizon,
            dim,
            nodes,
            levels,
            leaves,
        }
    }

    /// Assembles a tree from raw nodes without enforcing any invariant.
    ///
    /// Children are attached in the given order; subtrees whose node mass is
    /// exactly zero are pruned. Use [`validate`] to inspect the result and
    /// [`FiniteProcess::canonicalize`] to turn a clean tree into canonical
    /// form.
    pub fn from_raw_nodes(horizon: usize, dim: usize, raw: &[RawNode]) -> Result<Self> {
        let root = raw
            .iter()
            .position(|n| n.parent.is_none())
            .ok_or_else(|| Error::Parse("tree has no root node".into()))?;
        let index: BTreeMap<usize, usize> =
            raw.iter().enumerate().map(|(k, n)| (n.id, k)).collect();
        if index.len() != raw.len() {
            return Err(Error::Parse("duplicate node ids".into()));
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); raw.len()];
        for (k, n) in raw.iter().enumerate() {
            if let Some(p) = n.parent {
                let pk = *index
                    .get(&p)
                    .ok_or_else(|| Error::Parse(format!("node {} has unknown parent {p}", n.id)))?;
                kids[pk].push(k);
            } else if k != root {
                return Err(Error::Parse("tree has more than one root".into()));
            }
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut levels: Vec<Vec<NodeId>> = Vec::new();
        let mut leaves = Vec::new();
        // Depth-first so that leaf ranges are contiguous.
        fn visit(
            k: usize,
            parent: Option<NodeId>,
            depth: usize,
            raw: &[RawNode],
            kids: &[Vec<usize>],
            nodes: &mut Vec<Node>,
            levels: &mut Vec<Vec<NodeId>>,
            leaves: &mut Vec<NodeId>,
        ) -> Result<Option<NodeId>> {
            if raw[k].mass == 0.0 {
                return Ok(None);
            }
            if depth > raw.len() {
                return Err(Error::Parse("cycle in node parents".into()));
            }
            let id = nodes.len();
            let state = if depth == 0 {
                None
            } else {
                Some(StatePoint::new(raw[k].value.clone().unwrap_or_default())?)
            };
            nodes.push(Node {
                depth,
                state,
                mass: raw[k].mass,
                parent,
                children: Vec::new(),
                leaf_range: leaves.len()..leaves.len(),
            });
            if levels.len() <= depth {
                levels.resize(depth + 1, Vec::new());
            }
            levels[depth].push(id);
            for &c in &kids[k] {
                if let Some(cid) = visit(c, Some(id), depth + 1, raw, kids, nodes, levels, leaves)? {
                    nodes[id].children.push(cid);
                }
            }
            if nodes[id].children.is_empty() {
                leaves.push(id);
            }
            nodes[id].leaf_range.end = leaves.len();
            Ok(Some(id))
        }
        visit(
            root,
            None,
            0,
            raw,
            &kids,
            &mut nodes,
            &mut levels,
            &mut leaves,
        )?;
        levels.resize(levels.len().max(horizon + 1), Vec::new());
        Ok(Self {
            horizon,
            dim,
            nodes,
            levels,
            leaves,
        })
    }

    /// Rebuilds the canonical tree from this tree's leaves.
    pub fn canonicalize(&self, tol: f64) -> Result<Self> {
        let report = validate(self, tol);
        if let Some(first) = report.first() {
            return Err(Error::Parse(format!("invalid tree: {first}")));
        }
        Self::from_paths(&self.paths(), tol)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        0
    }

    /// Node ids at depth `t`, in prefix order.
    pub fn level(&self, t: usize) -> &[NodeId] {
        &self.levels[t]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Leaf ids below `id`.
    pub fn leaves_under(&self, id: NodeId) -> &[NodeId] {
        &self.leaves[self.nodes[id].leaf_range.clone()]
    }

    /// Ancestor of `id` at depth `t` (`id` itself when `t` is its depth).
    pub fn ancestor(&self, mut id: NodeId, t: usize) -> NodeId {
        while self.nodes[id].depth > t {
            id = self.nodes[id].parent.expect("non-root has a parent");
        }
        id
    }

    /// States from depth 1 to the depth of `id`.
    pub fn prefix(&self, id: NodeId) -> Path {
        let mut out = Vec::with_capacity(self.nodes[id].depth);
        let mut cur = id;
        while let Some(state) = &self.nodes[cur].state {
            out.push(state.clone());
            cur = self.nodes[cur].parent.expect("non-root has a parent");
        }
        out.reverse();
        out
    }

    /// The derived path list, in lexicographic order.
    pub fn paths(&self) -> Vec<(Path, f64)> {
        self.leaves
            .iter()
            .map(|&l| (self.prefix(l), self.nodes[l].mass))
            .collect()
    }

    /// Node whose prefix equals `prefix`, if it is in the support.
    pub fn find_node(&self, prefix: &[StatePoint]) -> Option<NodeId> {
        let mut cur = 0;
        for x in prefix {
            cur = *self.nodes[cur]
                .children
                .iter()
                .find(|&&c| self.nodes[c].state.as_ref() == Some(x))?;
        }
        Some(cur)
    }

    /// Conditional law of `X_{t+1..N}` given the node `id` at depth `t`.
    pub fn conditional(&self, id: NodeId) -> Distribution {
        let node = &self.nodes[id];
        let t = node.depth;
        let atoms = self
            .leaves_under(id)
            .iter()
            .map(|&l| {
                let mut suffix = self.prefix(l);
                suffix.drain(..t);
                (suffix, self.nodes[l].mass / node.mass)
            })
            .collect();
        Distribution::from_sorted_unchecked(atoms)
    }

    /// Conditional law of the remaining coordinates given a support prefix.
    pub fn disintegrate(&self, prefix: &[StatePoint]) -> Result<Distribution> {
        if prefix.len() >= self.horizon {
            return Err(Error::RangeOutOfBounds {
                from: prefix.len(),
                to: prefix.len(),
                horizon: self.horizon,
            });
        }
        let id = self
            .find_node(prefix)
            .ok_or(Error::PrefixNotInSupport(prefix.len()))?;
        Ok(self.conditional(id))
    }

    /// Law of `(X_from, ..., X_to)` (1-based, inclusive).
    pub fn marginal(&self, from_t: usize, to_t: usize) -> Result<Distribution> {
        if from_t < 1 || from_t > to_t || to_t > self.horizon {
            return Err(Error::RangeOutOfBounds {
                from: from_t,
                to: to_t,
                horizon: self.horizon,
            });
        }
        let mut acc: BTreeMap<Path, f64> = BTreeMap::new();
        for &l in &self.leaves {
            let path = self.prefix(l);
            *acc.entry(path[from_t - 1..to_t].to_vec()).or_insert(0.0) += self.nodes[l].mass;
        }
        Ok(Distribution::from_sorted_unchecked(acc.into_iter().collect()))
    }

    /// `E_μ[ρ(x0, X)^p]` with the path metric.
    pub fn pth_moment(&self, m: &MetricSpec, x0: &[StatePoint]) -> Result<f64> {
        if x0.len() != self.horizon {
            return Err(Error::RaggedPaths {
                index: 0,
                expected: self.horizon,
                found: x0.len(),
            });
        }
        self.leaves
            .iter()
            .map(|&l| Ok(self.nodes[l].mass * m.path_cost(x0, &self.prefix(l))?))
            .sum()
    }

    /// Point mass at one path.
    pub fn dirac(path: Path) -> Result<Self> {
        Self::from_paths(&[(path, 1.0)], DEFAULT_TOL)
    }
}

/// Node record of the raw tree format.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RawNode {
    pub id: usize,
    #[serde(default)]
    pub parent: Option<usize>,
    #[serde(default)]
    pub value: Option<Vec<f64>>,
    pub mass: f64,
}

/// Checks that two processes live on the same path space.
pub fn check_compatible(a: &FiniteProcess, b: &FiniteProcess) -> Result<()> {
    if a.horizon() != b.horizon() {
        return Err(Error::HorizonMismatch {
            left: a.horizon(),
            right: b.horizon(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}
