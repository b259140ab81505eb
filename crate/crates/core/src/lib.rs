//! Learned sensitivity and inverse sensitivity of closed-loop dynamical systems.
//!
//! The crate samples trajectories of a closed-loop system, turns them into
//! supervised records for the sensitivity function `Φ(x0, v, t)` and its
//! inverse `Φ⁻¹(x0, v, t)`, fits small feedforward networks to both, and then
//! uses the learned maps for state-space exploration:
//!
//! - [`explore::reach_target`] steers a trajectory so it passes near a target
//!   state at a given time, by repeatedly correcting the initial state with the
//!   inverse-sensitivity network.
//! - [`explore::predict_trajectory`] predicts neighbouring trajectories from a
//!   single simulated anchor trajectory and the forward-sensitivity network.
//! - [`falsify`] searches for trajectories that enter an unsafe box.
//!
//! Module map:
//!
//! | module       | contents                                                      |
//! |--------------|---------------------------------------------------------------|
//! | [`dynamics`] | system definitions, the benchmark registry, NN controllers    |
//! | [`sim`]      | fixed-step RK4 trajectories, linear sensitivity via `expm`    |
//! | [`data`]     | corpus generation, virtual-trajectory records, datasets       |
//! | [`net`]      | feedforward network, backprop, SGD training, metrics          |
//! | [`explore`]  | target reaching and trajectory prediction                     |
//! | [`falsify`]  | safety falsification and distance profiles                    |
//! | [`cli`]      | configuration-driven pipeline behind the `neurosens` binary   |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod data;
pub mod dynamics;
mod error;
pub mod explore;
pub mod falsify;
pub mod linalg;
pub mod net;
pub mod region;
pub mod sim;

pub use dynamics::{builtin_system, SystemKind, SystemSpec};
pub use error::{Error, Result};
pub use region::BoxRegion;
pub use sim::{simulate, simulate_backward, Trajectory};
