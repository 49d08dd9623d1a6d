//! Federated ensemble model-based reinforcement learning.
//!
//! K simulated clients fit delta-predicting dynamics networks on their own
//! replay buffers; a server collects the uploads into an ensemble, distills it
//! into a single student network, and trains a Gaussian policy with TRPO on
//! fictitious rollouts through the ensemble. The [`theory`] module checks the
//! monotonic-improvement machinery exactly on tabular MDPs.
//!
//! Data-parallel loops (clients, rollouts, theory instances) run on rayon when
//! the `parallel` feature is enabled and sequentially otherwise. Both paths
//! produce bit-identical results.

pub mod dynamics;
pub mod envs;
pub mod error;
pub mod federation;
pub mod nn;
pub mod par;
pub mod policy;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
