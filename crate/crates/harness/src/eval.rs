use femrl_core::envs::Environment;
use femrl_core::par;
use femrl_core::policy::GaussianPolicy;
use femrl_core::rng::SeedTree;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
}

/// Undiscounted returns of `episodes` mean-action rollouts. Initial states
/// come from `seed` alone, independent of any training randomness.
pub fn evaluate_policy(policy: &GaussianPolicy, env: &dyn Environment, episodes: usize, seed: u64) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(HarnessError::Config("evaluation needs at least one episode".into()));
    }
    let tree = SeedTree::new(seed).child("eval");
    let returns = par::map_range(episodes, |i| -> Result<f64> {
        let mut rng = tree.index(i as u64).rng();
        let mut s = env.reset(&mut rng);
        let mut total = 0.0;
        for _ in 0..env.spec().max_episode_len {
            let a = policy.mean(&s)?;
            let step = env.step(&s, &a)?;
            total += step.reward;
            if step.terminal {
                break;
            }
            s = step.next_state;
        }
        Ok(total)
    });
    let returns = returns.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(EvalResult { mean, std: var.sqrt() })
}
