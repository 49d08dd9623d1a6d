use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::Matrix;

use super::value::ValueFunction;

/// On-policy experience in time order. `episode_ends[t]` marks the last step
/// of an episode (termination, truncation or end of collection); only
/// `terminals[t]` stops bootstrapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub terminals: Vec<bool>,
    pub episode_ends: Vec<bool>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        state: Vec<f64>,
        action: Vec<f64>,
        reward: f64,
        next_state: Vec<f64>,
        terminal: bool,
        episode_end: bool,
        log_prob: f64,
    ) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.next_states.push(next_state);
        self.terminals.push(terminal);
        self.episode_ends.push(episode_end || terminal);
        self.log_probs.push(log_prob);
    }

    /// Appends another batch; its first step starts a new episode.
    pub fn extend(&mut self, other: RolloutBatch) {
        if let Some(last) = self.episode_ends.last_mut() {
            *last = true;
        }
        self.states.extend(other.states);
        self.actions.extend(other.actions);
        self.rewards.extend(other.rewards);
        self.next_states.extend(other.next_states);
        self.terminals.extend(other.terminals);
        self.episode_ends.extend(other.episode_ends);
        self.log_probs.extend(other.log_probs);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state_matrix(&self) -> Result<Matrix> {
        Matrix::from_rows(&self.states)
    }

    pub fn action_matrix(&self) -> Result<Matrix> {
        Matrix::from_rows(&self.actions)
    }

    /// Undiscounted return of every complete episode in the batch.
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for (r, end) in self.rewards.iter().zip(&self.episode_ends) {
            acc += r;
            if *end {
                out.push(acc);
                acc = 0.0;
            }
        }
        out
    }

    /// Fills `advantages` and `returns` using `value_fn` as the baseline.
    pub fn compute_gae(&mut self, value_fn: &ValueFunction, gamma: f64, lambda: f64) -> Result<()> {
        if self.is_empty() {
            return error::argument("empty rollout batch");
        }
        let values = value_fn.predict_batch(&self.state_matrix()?)?;
        let next_values = value_fn.predict_batch(&Matrix::from_rows(&self.next_states)?)?;
        let (adv, ret) =
            compute_gae(&self.rewards, &values, &next_values, &self.terminals, &self.episode_ends, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Generalized advantage estimation over concatenated episodes.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminals: &[bool],
    episode_ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || next_values.len() != n || terminals.len() != n || episode_ends.len() != n {
        return error::argument("GAE inputs have different lengths");
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return error::argument("gamma and lambda must lie in [0, 1]");
    }
    let mut adv = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        if episode_ends[t] || terminals[t] {
            gae = 0.0;
        }
        let bootstrap = if terminals[t] { 0.0 } else { next_values[t] };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        gae = delta + gamma * lambda * gae;
        adv[t] = gae;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shifts to zero mean and scales to unit standard deviation. Constant
/// inputs become all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(rewards: &[f64], values: &[f64], last_value: f64, terminal: bool, gamma: f64, lambda: f64) -> Vec<f64> {
        let n = rewards.len();
        let v_next = |t: usize| if t + 1 < n { values[t + 1] } else if terminal { 0.0 } else { last_value };
        let deltas: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * v_next(t) - values[t]).collect();
        (0..n)
            .map(|t| (t..n).map(|l| (gamma * lambda).powi((l - t) as i32) * deltas[l]).sum())
            .collect()
    }

    #[test]
    fn matches_brute_force_sum() {
        let rewards = [1.0, -0.5, 2.0, 0.3, 0.0];
        let values = [0.2, 0.1, -0.3, 0.5, 0.9];
        let last = 0.7;
        let next: Vec<f64> = (0..5).map(|t| if t < 4 { values[t + 1] } else { last }).collect();
        for terminal in [false, true] {
            let mut term = [false; 5];
            term[4] = terminal;
            let mut ends = [false; 5];
            ends[4] = true;
            let (adv, ret) = compute_gae(&rewards, &values, &next, &term, &ends, 0.97, 0.9).unwrap();
            let expected = brute(&rewards, &values, last, terminal, 0.97, 0.9);
            for t in 0..5 {
                assert!((adv[t] - expected[t]).abs() < 1e-12);
                assert!((ret[t] - adv[t] - values[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let (adv, _) =
            compute_gae(&[1.0, 2.0], &[0.5, 0.5], &[0.5, 3.0], &[false, false], &[false, true], 0.9, 0.0).unwrap();
        assert!((adv[0] - (1.0 + 0.45 - 0.5)).abs() < 1e-12);
        assert!((adv[1] - (2.0 + 2.7 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn episodes_do_not_leak() {
        let (adv, _) = compute_gae(
            &[0.0, 100.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[false, true],
            &[true, true],
            0.99,
            0.95,
        )
        .unwrap();
        assert_eq!(adv[0], 0.0);
    }

    #[test]
    fn normalization() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
        let mut z = vec![0.0; 3];
        normalize_advantages(&mut z);
        assert_eq!(z, vec![0.0; 3]);
    }
}
