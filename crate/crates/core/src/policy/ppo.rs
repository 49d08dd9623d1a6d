use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::{Adam, Matrix};
use crate::rng::Rng;

use super::gae::RolloutBatch;
use super::gaussian::GaussianPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub lr: f64,
    pub entropy_coef: f64,
    pub minibatch: usize,
    pub steps_per_epoch: usize,
    pub update_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            lr: 1e-3,
            entropy_coef: 0.01,
            minibatch: 100,
            steps_per_epoch: 5000,
            update_epochs: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip >= 0.0) || !(self.lr > 0.0) || self.minibatch == 0 || self.update_epochs == 0 {
            return error::config("invalid PPO settings");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    pub objective_before: f64,
    pub objective_after: f64,
    pub clip_fraction: f64,
    pub gradient_steps: usize,
}

/// Clipped surrogate plus entropy bonus (to be maximized), averaged over the
/// batch. When `grad` is given it receives the gradient in the flat layout.
#[allow(clippy::too_many_arguments)]
pub fn ppo_objective(
    policy: &GaussianPolicy,
    states: &Matrix,
    actions: &Matrix,
    advantages: &[f64],
    old_log_probs: &[f64],
    clip: f64,
    entropy_coef: f64,
    grad: Option<&mut Vec<f64>>,
) -> Result<(f64, f64)> {
    let n = advantages.len();
    if n == 0 || states.rows() != n || actions.rows() != n || old_log_probs.len() != n {
        return error::argument("PPO batch length mismatch");
    }
    let cache = policy.mean_net.forward_cached(states.clone())?;
    let lps = policy.log_probs_from_means(cache.output(), actions);
    let mut obj = 0.0;
    let mut clipped = 0usize;
    let mut weights = vec![0.0; n];
    for t in 0..n {
        let r = (lps[t] - old_log_probs[t]).exp();
        let a = advantages[t];
        let unclipped = r * a;
        let c = r.clamp(1.0 - clip, 1.0 + clip) * a;
        if unclipped <= c {
            obj += unclipped;
            weights[t] = unclipped / n as f64;
        } else {
            obj += c;
            clipped += 1;
        }
    }
    obj = obj / n as f64 + entropy_coef * policy.entropy();
    if let Some(g) = grad {
        let mut flat = policy.weighted_log_prob_gradient(&cache, actions, &weights)?;
        let n_mean = policy.mean_net.param_count();
        for x in &mut flat[n_mean..] {
            *x += entropy_coef;
        }
        *g = flat;
    }
    Ok((obj, clipped as f64 / n as f64))
}

/// Minibatch Adam ascent on the clipped objective for `update_epochs` passes.
/// The batch must carry advantages; `log_probs` are the behaviour densities.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<PpoDiagnostics> {
    cfg.validate()?;
    if batch.is_empty() || batch.advantages.len() != batch.len() {
        return error::argument("PPO needs a non-empty batch with advantages");
    }
    let states = batch.state_matrix()?;
    let actions = batch.action_matrix()?;
    let (objective_before, _) =
        ppo_objective(policy, &states, &actions, &batch.advantages, &batch.log_probs, cfg.clip, cfg.entropy_coef, None)?;
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    let mut steps = 0;
    let mut params = policy.flat_params();
    let mut grad = Vec::new();
    for _ in 0..cfg.update_epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.minibatch) {
            let s = Matrix::from_rows(&chunk.iter().map(|&i| batch.states[i].as_slice()).collect::<Vec<_>>())?;
            let a = Matrix::from_rows(&chunk.iter().map(|&i| batch.actions[i].as_slice()).collect::<Vec<_>>())?;
            let adv: Vec<f64> = chunk.iter().map(|&i| batch.advantages[i]).collect();
            let old: Vec<f64> = chunk.iter().map(|&i| batch.log_probs[i]).collect();
            ppo_objective(policy, &s, &a, &adv, &old, cfg.clip, cfg.entropy_coef, Some(&mut grad))?;
            if grad.iter().any(|g| !g.is_finite()) {
                return error::internal("non-finite PPO gradient");
            }
            grad.iter_mut().for_each(|g| *g = -*g);
            adam.step(&mut params, &grad)?;
            policy.set_flat_params(&params)?;
            params = policy.flat_params();
            steps += 1;
        }
    }
    let (objective_after, clip_fraction) =
        ppo_objective(policy, &states, &actions, &batch.advantages, &batch.log_probs, cfg.clip, cfg.entropy_coef, None)?;
    Ok(PpoDiagnostics { objective_before, objective_after, clip_fraction, gradient_steps: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, SeedTree};

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeedTree::new(12).rng();
        let p = GaussianPolicy::new(2, 1, &[5], &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..16).map(|_| vec![standard_normal(&mut rng), standard_normal(&mut rng)]).collect();
        let states = Matrix::from_rows(&rows).unwrap();
        let acts: Vec<Vec<f64>> = (0..16).map(|_| vec![standard_normal(&mut rng)]).collect();
        let actions = Matrix::from_rows(&acts).unwrap();
        let adv: Vec<f64> = (0..16).map(|_| standard_normal(&mut rng)).collect();
        let old: Vec<f64> = p.log_probs_from_means(&p.mean_batch(&states).unwrap(), &actions).iter().map(|l| l + 0.05).collect();
        let mut g = Vec::new();
        ppo_objective(&p, &states, &actions, &adv, &old, 10.0, 0.01, Some(&mut g)).unwrap();
        let theta = p.flat_params();
        for i in [0, 3, theta.len() - 2, theta.len() - 1] {
            let f = |d: f64| {
                let mut q = p.clone();
                let mut t = theta.clone();
                t[i] += d;
                q.set_flat_params(&t).unwrap();
                ppo_objective(&q, &states, &actions, &adv, &old, 10.0, 0.01, None).unwrap().0
            };
            let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
    }
}
