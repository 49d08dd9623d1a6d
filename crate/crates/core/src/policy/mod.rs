//! Gaussian policies and the on-policy optimizers that train them: GAE,
//! TRPO (conjugate gradient + backtracking line search) and clipped PPO.

mod gae;
mod gaussian;
mod ppo;
mod trpo;
mod tvd;
mod value;

pub use gae::{compute_gae, normalize_advantages, RolloutBatch};
pub use gaussian::{diag_gaussian_kl, GaussianPolicy, LOG_STD_FLOOR};
pub use ppo::{ppo_objective, ppo_update, PpoConfig, PpoDiagnostics};
pub use trpo::{
    conjugate_gradient, fisher_vector_product, mean_kl, surrogate, surrogate_gradient, trpo_update, TrpoConfig,
    TrpoDiagnostics, TrpoFailure,
};
pub use tvd::{
    mixture_tvd, pinsker_bound, policy_tvd, DiagGaussian, GaussianMixture,
    TvdEstimator,
};
pub use value::{fit_value_fn, ValueFunction};
