use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::{Activation, ForwardCache, Gradients, Matrix, Mlp};
use crate::rng::{standard_normal, Rng};

/// `ln(1e-8)`: smallest allowed log standard deviation.
pub const LOG_STD_FLOOR: f64 = -18.420_680_743_952_367;

/// Diagonal Gaussian policy `N(μ(s), diag(exp(2·log_std)))` with a
/// state-independent, trainable `log_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    /// ReLU mean network with a shrunken output layer; `log_std` starts at 0.
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let mean_net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, 0.01, rng)?;
        Ok(Self { mean_net, log_std: vec![0.0; action_dim] })
    }

    pub fn from_parts(mean_net: Mlp, log_std: Vec<f64>) -> Result<Self> {
        if mean_net.output_dim() != log_std.len() {
            return error::config("log_std length must equal the action dimension");
        }
        if log_std.iter().any(|l| !l.is_finite()) {
            return error::config("log_std must be finite");
        }
        let log_std = log_std.into_iter().map(|l| l.max(LOG_STD_FLOOR)).collect();
        Ok(Self { mean_net, log_std })
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn set_log_std(&mut self, log_std: &[f64]) -> Result<()> {
        if log_std.len() != self.log_std.len() {
            return error::config("log_std length mismatch");
        }
        self.log_std = log_std.iter().map(|l| l.max(LOG_STD_FLOOR)).collect();
        Ok(())
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.mean_net.param_count() + self.log_std.len()
    }

    /// Mean-network parameters followed by `log_std`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.mean_net.params().to_vec();
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.mean_net.param_count();
        if flat.len() != n + self.log_std.len() {
            return error::config("flat parameter length mismatch");
        }
        self.mean_net.set_params(&flat[..n])?;
        self.set_log_std(&flat[n..])
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(state)
    }

    pub fn mean_batch(&self, states: &Matrix) -> Result<Matrix> {
        self.mean_net.forward_batch(states)
    }

    /// Draws `a = μ(s) + exp(log_std) ⊙ z` and returns it with its log density.
    pub fn sample_action(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mu = self.mean(state)?;
        let action: Vec<f64> =
            mu.iter().zip(&self.log_std).map(|(m, l)| m + l.exp() * standard_normal(rng)).collect();
        let lp = log_density(&mu, &self.log_std, &action);
        Ok((action, lp))
    }

    /// Samples one action per row of `states` (row order consumes the rng).
    pub fn sample_batch(&self, states: &Matrix, rng: &mut Rng) -> Result<(Matrix, Vec<f64>)> {
        let mu = self.mean_batch(states)?;
        let mut actions = mu.clone();
        let mut lps = Vec::with_capacity(states.rows());
        for r in 0..states.rows() {
            for (a, l) in actions.row_mut(r).iter_mut().zip(&self.log_std) {
                *a += l.exp() * standard_normal(rng);
            }
            lps.push(log_density(mu.row(r), &self.log_std, actions.row(r)));
        }
        Ok((actions, lps))
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return error::config("action length mismatch");
        }
        Ok(log_density(&self.mean(state)?, &self.log_std, action))
    }

    pub fn log_probs_from_means(&self, means: &Matrix, actions: &Matrix) -> Vec<f64> {
        (0..means.rows()).map(|r| log_density(means.row(r), &self.log_std, actions.row(r))).collect()
    }

    /// Differential entropy `Σ (log_std + ½·ln(2πe))`.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|l| l + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
    }

    /// Gradient (flat layout) of `Σ_t w_t · log π(a_t|s_t)` given a cached
    /// forward pass of the mean network over the states.
    pub fn weighted_log_prob_gradient(&self, cache: &ForwardCache, actions: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
        let mu = cache.output();
        let n = mu.rows();
        if actions.rows() != n || weights.len() != n {
            return error::config("batch length mismatch");
        }
        let inv_var: Vec<f64> = self.log_std.iter().map(|l| (-2.0 * l).exp()).collect();
        let mut out_grad = Matrix::zeros(n, self.action_dim());
        let mut ls_grad = vec![0.0; self.action_dim()];
        for r in 0..n {
            for i in 0..self.action_dim() {
                let diff = actions.get(r, i) - mu.get(r, i);
                out_grad.set(r, i, weights[r] * diff * inv_var[i]);
                ls_grad[i] += weights[r] * (diff * diff * inv_var[i] - 1.0);
            }
        }
        let mut g = Gradients::zeros_like(&self.mean_net);
        self.mean_net.backward(cache, &out_grad, &mut g)?;
        let mut flat = g.values;
        flat.extend(ls_grad);
        Ok(flat)
    }
}

/// Log density of a diagonal Gaussian.
pub(crate) fn log_density(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    let mut lp = -0.5 * mean.len() as f64 * (2.0 * PI).ln();
    for ((m, l), v) in mean.iter().zip(log_std).zip(x) {
        let z = (v - m) * (-l).exp();
        lp += -0.5 * z * z - l;
    }
    lp
}

/// `KL(N(μ₀, σ₀) ‖ N(μ₁, σ₁))` for diagonal Gaussians in log-std parameterization.
pub fn diag_gaussian_kl(mu0: &[f64], log_std0: &[f64], mu1: &[f64], log_std1: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mu0.len() {
        let var0 = (2.0 * log_std0[i]).exp();
        let var1 = (2.0 * log_std1[i]).exp();
        let d = mu0[i] - mu1[i];
        kl += log_std1[i] - log_std0[i] + (var0 + d * d) / (2.0 * var1) - 0.5;
    }
    kl
}
