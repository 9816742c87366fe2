//! Adapted optimal transport between laws of finite-support discrete-time
//! processes.
//!
//! The crate computes the plain, causal, symmetrized-causal and bicausal
//! (adapted / nested) Wasserstein distances between scenario trees, the
//! information maps and prediction processes that metrize the same adapted
//! topology, and optimal-stopping values together with the stability bound
//! that ties them to bicausal couplings.
//!
//! ```
//! use adapted_ot::prelude::*;
//!
//! let m = MetricSpec::absolute(1.0);
//! let mu = epsilon_reveal(0.1);
//! let nu = epsilon_limit();
//!
//! let w = wasserstein(&mu, &nu, &m).unwrap();
//! let (nd, _) = nested_distance(&mu, &nu, &m).unwrap();
//! assert!((w - 0.1).abs() < 1e-12);
//! assert!((nd - 1.1).abs() < 1e-12);
//! ```

pub mod causal;
pub mod error;
pub mod experiments;
pub mod format;
pub mod io;
pub mod lp;
pub mod nested;
pub mod process;
pub mod stopping;
pub mod topologies;
pub mod transport;

pub use error::{Error, Result};

/// Common imports.
pub mod prelude {
    pub use crate::causal::{
        bicausal_distance_lp, build_causal_lp, causal_distance, check_causality,
        symmetrized_causal, two_period_lifted_cw, Coupling, Direction,
    };
    pub use crate::experiments::{
        epsilon_limit, epsilon_reveal, make_family, make_limit, run_convergence,
        vanishing_noise, Family, FamilySpec,
    };
    pub use crate::nested::{iterated_wasserstein, nested_distance, nested_embedding};
    pub use crate::process::{
        scalar_path, Distribution, FiniteProcess, Ground, MetricSpec, StatePoint, DEFAULT_TOL,
    };
    pub use crate::stopping::{snell_value, RewardProcess};
    pub use crate::topologies::{aldous_distance, hellwig_distance, prediction_process};
    pub use crate::transport::{solve_ot, wasserstein, TransportProblem};
}
