//! Learned dynamics `T̂(s'|s, a; w)`: a delta-predicting MLP with per-client
//! normalization statistics, the multi-step prediction loss, and ensembles.

mod ensemble;
mod loss;
mod model;
mod stats;

pub use ensemble::{EnsembleModel, TransitionModel};
pub use loss::{h_step_loss, h_step_loss_batch, h_step_loss_gradient, Segment};
pub use model::{DynamicsConfig, DynamicsModel};
pub use stats::{update_norm_stats, NormStats, SIGMA_FLOOR};
