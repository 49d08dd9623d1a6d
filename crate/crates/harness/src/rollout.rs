use femrl_core::envs::Environment;
use femrl_core::policy::{GaussianPolicy, RolloutBatch};
use femrl_core::rng::Rng;

use crate::error::Result;

/// A real-environment episode that persists across collection calls.
#[derive(Debug, Clone)]
pub struct EnvRunner {
    pub rng: Rng,
    state: Option<Vec<f64>>,
    t: usize,
}

impl EnvRunner {
    pub fn new(rng: Rng) -> Self {
        Self { rng, state: None, t: 0 }
    }

    /// Collects `steps` on-policy transitions. Episodes end on termination
    /// or at the environment's length limit; the last collected step always
    /// closes the batch.
    pub fn collect(&mut self, env: &dyn Environment, policy: &GaussianPolicy, steps: usize) -> Result<RolloutBatch> {
        let mut batch = RolloutBatch::new();
        for i in 0..steps {
            let s = match self.state.take() {
                Some(s) => s,
                None => {
                    self.t = 0;
                    env.reset(&mut self.rng)
                }
            };
            let (a, lp) = policy.sample_action(&s, &mut self.rng)?;
            let step = env.step(&s, &a)?;
            self.t += 1;
            let truncated = self.t >= env.spec().max_episode_len;
            let end = step.terminal || truncated || i + 1 == steps;
            batch.push(s, a, step.reward, step.next_state.clone(), step.terminal, end, lp);
            if !(step.terminal || truncated) {
                self.state = Some(step.next_state);
            }
        }
        Ok(batch)
    }
}
