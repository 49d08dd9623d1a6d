use crate::dynamics::{h_step_loss_batch, DynamicsModel, NormStats};
use crate::envs::{Environment, Transition};
use crate::error::{self, Result};
use crate::nn::{Adam, Gradients};
use crate::policy::GaussianPolicy;
use crate::rng::Rng;

use super::buffer::ReplayBuffer;

/// Everything one simulated client owns.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub buffer: ReplayBuffer,
    /// Snapshot of the policy this client collects data with.
    pub sample_policy: GaussianPolicy,
    /// Number of the server policy update the snapshot was taken at.
    pub policy_version: u64,
    pub model: DynamicsModel,
    pub stats: NormStats,
    pub rng: Rng,
    current_state: Option<Vec<f64>>,
    episode_step: usize,
    episode: u64,
    env_steps: u64,
}

impl ClientState {
    pub fn new(id: usize, capacity: usize, sample_policy: GaussianPolicy, model: DynamicsModel, rng: Rng) -> Self {
        let stats = NormStats::new(model.state_dim());
        Self {
            id,
            buffer: ReplayBuffer::new(capacity),
            sample_policy,
            policy_version: 0,
            model,
            stats,
            rng,
            current_state: None,
            episode_step: 0,
            episode: 0,
            env_steps: 0,
        }
    }

    /// Real environment steps taken so far.
    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }
}

/// Collects exactly `steps` transitions with the client's sample policy,
/// continuing the current episode and resetting on termination or truncation.
/// Stored actions are the clipped actions the environment applied.
pub fn client_sample(client: &mut ClientState, env: &dyn Environment, steps: usize) -> Result<usize> {
    let max_len = env.spec().max_episode_len;
    let mut deltas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let state = match client.current_state.take() {
            Some(s) => s,
            None => {
                client.episode_step = 0;
                env.reset(&mut client.rng)
            }
        };
        let (action, _) = client.sample_policy.sample_action(&state, &mut client.rng)?;
        let action = env.spec().clip_action(&action);
        let step = env.step(&state, &action)?;
        client.episode_step += 1;
        client.env_steps += 1;
        deltas.push(step.next_state.iter().zip(&state).map(|(a, b)| a - b).collect::<Vec<f64>>());
        let done = step.terminal || client.episode_step >= max_len;
        let transition = Transition {
            state,
            action,
            reward: step.reward,
            next_state: step.next_state.clone(),
            terminal: step.terminal,
        };
        client.buffer.push(transition, client.episode);
        if done {
            client.episode += 1;
        } else {
            client.current_state = Some(step.next_state);
        }
    }
    if !deltas.is_empty() {
        client.stats.update(&deltas)?;
    }
    Ok(steps)
}

/// Result of [`client_local_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub model: DynamicsModel,
    /// Training loss before each step.
    pub losses: Vec<f64>,
    /// Set when the buffer held too few segments; `model` is then the
    /// initial model unchanged.
    pub skipped: bool,
}

/// `E` Adam steps on the multi-step loss starting from `init`, normalizing
/// with the client's own statistics. The buffer is only read.
pub fn client_local_update(
    client: &mut ClientState,
    init: &DynamicsModel,
    local_steps: usize,
    batch_size: usize,
    horizon: usize,
    lr: f64,
) -> Result<LocalUpdate> {
    if batch_size == 0 {
        return error::config("local batch size must be positive");
    }
    let starts = client.buffer.segment_starts(horizon);
    if starts.len() < batch_size {
        log::warn!("client {} has {} usable segments, needs {batch_size}; skipping", client.id, starts.len());
        return Ok(LocalUpdate { model: init.clone(), losses: Vec::new(), skipped: true });
    }
    let mut model = init.clone();
    if local_steps == 0 {
        return Ok(LocalUpdate { model, losses: Vec::new(), skipped: false });
    }
    model.stats = client.stats.clone();
    let mut adam = Adam::new(model.net.param_count(), lr);
    let mut grads = Gradients::zeros_like(&model.net);
    let mut losses = Vec::with_capacity(local_steps);
    for _ in 0..local_steps {
        let batch = client.buffer.sample_segments(&starts, horizon, batch_size, &mut client.rng);
        grads.zero();
        losses.push(h_step_loss_batch(&model, &batch, horizon, Some(&mut grads))?);
        adam.step(model.net.params_mut(), &grads.values)?;
    }
    if !model.net.params().iter().all(|p| p.is_finite()) {
        return error::internal(format!("client {} diverged during local training", client.id));
    }
    client.model = model.clone();
    Ok(LocalUpdate { model, losses, skipped: false })
}
