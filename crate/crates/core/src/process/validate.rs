use std::fmt;

use serde::Serialize;

use super::{FiniteProcess, NodeId};

/// One broken tree invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RootMass { mass: f64 },
    NonPositiveMass { node: NodeId, mass: f64 },
    MassMismatch { node: NodeId, mass: f64, children: f64 },
    LeafDepth { node: NodeId, depth: usize, horizon: usize },
    StateDimension { node: NodeId, dim: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootMass { mass } => write!(f, "root mass {mass} != 1"),
            Violation::NonPositiveMass { node, mass } => {
                write!(f, "node {node}: nonpositive mass {mass}")
            }
            Violation::MassMismatch {
                node,
                mass,
                children,
            } => write!(f, "node {node}: mass {mass} != children sum {children}"),
            Violation::LeafDepth {
                node,
                depth,
                horizon,
            } => write!(f, "node {node}: leaf at depth {depth}, expected {horizon}"),
            Violation::StateDimension {
                node,
                dim,
                expected,
            } => write!(f, "node {node}: state dimension {dim}, expected {expected}"),
        }
    }
}

/// Reports every broken invariant; an empty report means the tree is sound.
pub fn validate(proc: &FiniteProcess, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let root = &proc.nodes[proc.root()];
    if (root.mass - 1.0).abs() > tol {
        out.push(Violation::RootMass { mass: root.mass });
    }
    for (id, node) in proc.nodes.iter().enumerate() {
        if node.mass.is_nan() || node.mass <= 0.0 {
            out.push(Violation::NonPositiveMass {
                node: id,
                mass: node.mass,
            });
        }
        if let Some(state) = &node.state {
            if state.dim() != proc.dim {
                out.push(Violation::StateDimension {
                    node: id,
                    dim: state.dim(),
                    expected: proc.dim,
                });
            }
        }
        if node.children.is_empty() {
            if node.depth != proc.horizon {
                out.push(Violation::LeafDepth {
                    node: id,
                    depth: node.depth,
                    horizon: proc.horizon,
                });
            }
        } else {
            let children: f64 = node.children.iter().map(|&c| proc.nodes[c].mass).sum();
            if (children - node.mass).abs() > tol {
                out.push(Violation::MassMismatch {
                    node: id,
                    mass: node.mass,
                    children,
                });
            }
        }
    }
    out
}
