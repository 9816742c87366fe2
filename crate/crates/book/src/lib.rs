//! The guide in `book/` compiled as doctests, so its snippets cannot drift
//! from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/scenario-trees.md")]
pub mod scenario_trees {}
#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}
#[doc = include_str!("../../../book/src/causal.md")]
pub mod causal {}
#[doc = include_str!("../../../book/src/nested.md")]
pub mod nested {}
#[doc = include_str!("../../../book/src/topologies.md")]
pub mod topologies {}
#[doc = include_str!("../../../book/src/stopping.md")]
pub mod stopping {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
