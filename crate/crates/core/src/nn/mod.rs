//! Dense tensors, feed-forward networks with explicit backpropagation, and
//! first-order optimizers.
//!
//! Network parameters live in one flat `Vec<f64>` (per layer: row-major
//! weights, then biases). Gradients, optimizer moments, federated averaging
//! and the wire format all operate on that flat layout.

mod matrix;
mod mlp;
mod optim;
mod serialize;

pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, Gradients, Mlp};
pub use optim::{sgd_minibatch, sgd_step, Adam, Optimizer};
pub use serialize::{mlp_from_bytes, mlp_to_bytes};

