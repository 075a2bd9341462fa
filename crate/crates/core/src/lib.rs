//! Chemical reaction networks simulated as random dynamical systems.
//!
//! Every trajectory is a deterministic function of a [`NoiseFiber`], so
//! trajectories started from different states can be driven by the same
//! noise, replayed exactly and pulled back from the past.
//!
//! ```
//! use rdsjump_core::{phi, Builtin, NoiseFiber, ReactionNetwork, State};
//!
//! let net = ReactionNetwork::builtin(Builtin::BirthDeath, &[10.0, 1.0]).unwrap();
//! let fiber = NoiseFiber::new(7);
//! let a = phi(&net, &fiber, 30, &State::scalar(0)).unwrap();
//! let b = phi(&net, &fiber, 30, &State::scalar(0)).unwrap();
//! assert_eq!(a, b);
//! ```

pub mod attractor;
pub mod error;
pub mod network;
pub mod noise;
pub mod oracle;
pub mod rds;
pub mod stationary;
pub mod twopoint;

pub use attractor::{attractor_fiber, pullback_point, AttractorFiber, PullbackConfig, StabilizationRule};
pub use error::{Error, Result};
pub use network::{Builtin, NetworkDefinition, Reaction, ReactionNetwork, State};
pub use noise::{NoiseFiber, Stream};
pub use rds::{kappa, phi, psi, tau, trajectory_ct, AugmentedPoint, CtTrajectory};
pub use stationary::{build_one_point_chain, build_two_point_chain, stationary_distribution, DistributionVector, PairClass};
pub use twopoint::{detect_synchronization, pair_transition_probs, SyncConfig, SyncReport};
