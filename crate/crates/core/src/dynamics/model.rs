use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::NormStats;
use crate::error::{self, Error, Result};
use crate::nn::{mlp_from_bytes, mlp_to_bytes, Activation, Matrix, Mlp};
use crate::rng::Rng;

/// Shape and training settings for dynamics networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    pub hidden: Vec<usize>,
    /// Prediction horizon `H` of the multi-step loss.
    pub horizon: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { hidden: vec![500, 500], horizon: 2, lr: 1e-3, batch_size: 128 }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4, 8].contains(&self.horizon) {
            return error::config("dynamics horizon must be one of 1, 2, 4, 8");
        }
        if self.hidden.iter().any(|&h| h == 0) || self.batch_size == 0 || !(self.lr > 0.0) {
            return error::config("dynamics hidden sizes, batch size and learning rate must be positive");
        }
        Ok(())
    }
}

/// Delta-predicting dynamics model.
///
/// The network maps `[s, a]` to the normalized delta `((s' - s) - μ) / σ`, so
/// `s' = s + net(s, a) ⊙ σ + μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub net: Mlp,
    pub stats: NormStats,
    state_dim: usize,
    action_dim: usize,
}

impl DynamicsModel {
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, 1.0, rng)?;
        Ok(Self { net, stats: NormStats::new(state_dim), state_dim, action_dim })
    }

    pub fn from_parts(net: Mlp, stats: NormStats, state_dim: usize, action_dim: usize) -> Result<Self> {
        if net.input_dim() != state_dim + action_dim || net.output_dim() != state_dim || stats.dim() != state_dim {
            return error::config("network/statistics shape does not match the state and action dimensions");
        }
        Ok(Self { net, stats, state_dim, action_dim })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn same_shape(&self, other: &DynamicsModel) -> bool {
        self.net.same_shape(&other.net) && self.state_dim == other.state_dim
    }

    /// Builds the `[s, a]` network input batch.
    pub(crate) fn inputs(&self, states: &Matrix, actions: &Matrix) -> Result<Matrix> {
        if states.cols() != self.state_dim || actions.cols() != self.action_dim || states.rows() != actions.rows() {
            return error::config("state/action batch does not match the dynamics model");
        }
        let mut x = Matrix::zeros(states.rows(), self.state_dim + self.action_dim);
        for r in 0..states.rows() {
            let row = x.row_mut(r);
            row[..self.state_dim].copy_from_slice(states.row(r));
            row[self.state_dim..].copy_from_slice(actions.row(r));
        }
        Ok(x)
    }

    pub fn predict_next_state(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let s = Matrix::from_vec(1, state.len(), state.to_vec())?;
        let a = Matrix::from_vec(1, action.len(), action.to_vec())?;
        Ok(self.predict_batch(&s, &a)?.into_data())
    }

    /// Next-state predictions for each row.
    pub fn predict_batch(&self, states: &Matrix, actions: &Matrix) -> Result<Matrix> {
        self.predict_batch_with(states, actions, &self.stats)
    }

    /// Prediction with explicit (e.g. server-side) normalization statistics.
    pub fn predict_batch_with(&self, states: &Matrix, actions: &Matrix, stats: &NormStats) -> Result<Matrix> {
        let x = self.inputs(states, actions)?;
        let y = self.net.forward_batch(&x)?;
        let std = stats.std();
        let mut out = states.clone();
        for r in 0..out.rows() {
            let yr = y.row(r);
            for (i, o) in out.row_mut(r).iter_mut().enumerate() {
                *o += yr[i] * std[i] + stats.mean()[i];
            }
        }
        Ok(out)
    }

    /// Writes `<path>.bin` (network wire format) and `<path>.stats.json`.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        std::fs::write(path.with_extension("bin"), mlp_to_bytes(&self.net)).map_err(io)?;
        let json = serde_json::to_string_pretty(&self.stats).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path.with_extension("stats.json"), json).map_err(io)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path, action_dim: usize) -> Result<Self> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        let net = mlp_from_bytes(&std::fs::read(path.with_extension("bin")).map_err(io)?)?;
        let text = std::fs::read_to_string(path.with_extension("stats.json")).map_err(io)?;
        let stats: NormStats = serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
        let state_dim = net.output_dim();
        Self::from_parts(net, stats, state_dim, action_dim)
    }
}
