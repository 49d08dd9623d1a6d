use rand::Rng as _;

use crate::dynamics::TransitionModel;
use crate::envs::Environment;
use crate::error::{self, Result};
use crate::nn::Matrix;
use crate::par;
use crate::policy::{GaussianPolicy, RolloutBatch};
use crate::rng::{Rng, SeedTree};

/// Rollouts advanced together in one batched model call.
const CHUNK: usize = 8;

/// The true environment dressed up as a transition model.
pub struct OracleModel<'a>(pub &'a dyn Environment);

impl TransitionModel for OracleModel<'_> {
    fn state_dim(&self) -> usize {
        self.0.spec().state_dim
    }

    fn predict_batch_rng(&self, states: &Matrix, actions: &Matrix, _rng: &mut Rng) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = (0..states.rows()).map(|r| self.0.transition(states.row(r), actions.row(r))).collect();
        Matrix::from_rows(&rows)
    }
}

#[derive(Debug, Clone, Default)]
pub struct FictitiousData {
    pub batch: RolloutBatch,
    /// Rollouts cut short by a non-finite predicted state.
    pub divergences: usize,
}

/// Rolls `policy` through `model` for `rollouts` rollouts of at most
/// `steps` steps from `s₀ ∼ ρ₀`. Rewards come from the environment's reward
/// function and the environment's termination predicate is applied to
/// predicted states. Stored actions are the raw policy samples; the model
/// sees them clipped.
pub fn generate_fictitious_data(
    model: &dyn TransitionModel,
    policy: &GaussianPolicy,
    env: &dyn Environment,
    rollouts: usize,
    steps: usize,
    rng: &mut Rng,
) -> Result<FictitiousData> {
    if model.state_dim() != env.spec().state_dim || policy.state_dim() != env.spec().state_dim {
        return error::config("model, policy and environment disagree on the state dimension");
    }
    if rollouts == 0 || steps == 0 {
        return Ok(FictitiousData::default());
    }
    let n_chunks = rollouts.div_ceil(CHUNK);
    let seeds: Vec<(usize, u64)> = (0..n_chunks).map(|c| (c, rng.random::<u64>())).collect();
    let parts = par::map(&seeds, |&(c, seed)| {
        let count = CHUNK.min(rollouts - c * CHUNK);
        run_chunk(model, policy, env, count, steps, &mut SeedTree::new(seed).rng())
    });
    let mut out = FictitiousData::default();
    for part in parts {
        let part = part?;
        out.divergences += part.divergences;
        out.batch.extend(part.batch);
    }
    Ok(out)
}

struct Track {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    next_states: Vec<Vec<f64>>,
    terminals: Vec<bool>,
    log_probs: Vec<f64>,
    current: Vec<f64>,
    done: bool,
}

fn run_chunk(
    model: &dyn TransitionModel,
    policy: &GaussianPolicy,
    env: &dyn Environment,
    count: usize,
    steps: usize,
    rng: &mut Rng,
) -> Result<FictitiousData> {
    let mut tracks: Vec<Track> = (0..count)
        .map(|_| Track {
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            terminals: Vec::new(),
            log_probs: Vec::new(),
            current: env.reset(rng),
            done: false,
        })
        .collect();
    let mut divergences = 0;
    for _ in 0..steps {
        let active: Vec<usize> = (0..count).filter(|&i| !tracks[i].done).collect();
        if active.is_empty() {
            break;
        }
        let states = Matrix::from_rows(&active.iter().map(|&i| tracks[i].current.as_slice()).collect::<Vec<_>>())?;
        let (actions, log_probs) = policy.sample_batch(&states, rng)?;
        let clipped: Vec<Vec<f64>> = (0..actions.rows()).map(|r| env.spec().clip_action(actions.row(r))).collect();
        let next = model.predict_batch_rng(&states, &Matrix::from_rows(&clipped)?, rng)?;
        for (r, &i) in active.iter().enumerate() {
            let s_next = next.row(r);
            let track = &mut tracks[i];
            if s_next.iter().any(|x| !x.is_finite()) {
                divergences += 1;
                track.done = true;
                continue;
            }
            let reward = env.reward_clipped(states.row(r), &clipped[r]);
            let terminal = env.is_terminal(s_next);
            track.states.push(states.row(r).to_vec());
            track.actions.push(actions.row(r).to_vec());
            track.rewards.push(reward);
            track.next_states.push(s_next.to_vec());
            track.terminals.push(terminal);
            track.log_probs.push(log_probs[r]);
            track.current = s_next.to_vec();
            track.done = terminal;
        }
    }
    let mut batch = RolloutBatch::new();
    for t in tracks {
        let n = t.rewards.len();
        for j in 0..n {
            batch.push(
                t.states[j].clone(),
                t.actions[j].clone(),
                t.rewards[j],
                t.next_states[j].clone(),
                t.terminals[j],
                j + 1 == n,
                t.log_probs[j],
            );
        }
    }
    Ok(FictitiousData { batch, divergences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ContinuousEnv;

    #[test]
    fn zero_steps_is_empty() {
        let env = ContinuousEnv::by_name("pendulum").unwrap();
        let mut rng = SeedTree::new(1).rng();
        let p = GaussianPolicy::new(3, 1, &[8], &mut rng).unwrap();
        let d = generate_fictitious_data(&OracleModel(&env), &p, &env, 4, 0, &mut rng).unwrap();
        assert!(d.batch.is_empty());
    }

    #[test]
    fn oracle_rollouts_match_real_dynamics_and_rewards() {
        let env = ContinuousEnv::by_name("pendulum").unwrap();
        let mut rng = SeedTree::new(2).rng();
        let p = GaussianPolicy::new(3, 1, &[8], &mut rng).unwrap();
        let d = generate_fictitious_data(&OracleModel(&env), &p, &env, 10, 30, &mut rng).unwrap();
        assert_eq!(d.batch.len(), 300);
        for t in 0..d.batch.len() {
            let step = env.step(&d.batch.states[t], &d.batch.actions[t]).unwrap();
            assert_eq!(step.next_state, d.batch.next_states[t]);
            assert_eq!(step.reward, d.batch.rewards[t]);
            assert_eq!(env.reward(&d.batch.states[t], &d.batch.actions[t]), d.batch.rewards[t]);
        }
    }
}
