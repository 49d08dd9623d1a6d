//! Built-in environments with known reward functions.
//!
//! Continuous environments are pure state machines: `step` maps an explicit
//! `(state, action)` pair to the next state, so replaying an action sequence
//! from the same reset reproduces the trajectory exactly. Tabular MDPs back
//! the exact theory checks.

mod continuous;
pub(crate) mod tabular;

use serde::{Deserialize, Serialize};

pub use continuous::{ContinuousEnv, LinearSystem, MountainCar, Pendulum, PointMass2D};
pub use tabular::{make_random_tabular_mdp, TabularMdp};

use crate::error::{self, Result};
use crate::rng::Rng;

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_len: usize,
    pub gamma: f64,
}

impl EnvSpec {
    pub const DEFAULT_MAX_EPISODE_LEN: usize = 500;

    pub fn validate(&self) -> Result<()> {
        if self.action_low.len() != self.action_dim || self.action_high.len() != self.action_dim {
            return error::config("action bounds must match action_dim");
        }
        for (lo, hi) in self.action_low.iter().zip(&self.action_high) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return error::config("action bounds must be finite with low < high");
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return error::config("discount must lie in (0, 1)");
        }
        if self.max_episode_len == 0 {
            return error::config("max_episode_len must be positive");
        }
        Ok(())
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }
}

/// One environment step `(s, a, r, s', terminal)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Result of [`Environment::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// A continuous-control environment with a closed-form reward.
pub trait Environment: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Draws an initial state from the environment's ρ₀.
    fn reset(&self, rng: &mut Rng) -> Vec<f64>;

    /// Deterministic transition. Actions are clipped into bounds; non-finite
    /// actions are rejected.
    fn step(&self, state: &[f64], action: &[f64]) -> Result<Step> {
        self.check(state, action)?;
        let clipped = self.spec().clip_action(action);
        let next_state = self.transition(state, &clipped);
        let terminal = self.is_terminal(&next_state);
        Ok(Step { reward: self.reward_clipped(state, &clipped), next_state, terminal })
    }

    /// Pure reward `R(s, a)`; equals the reward `step` returns for the same pair.
    fn reward(&self, state: &[f64], action: &[f64]) -> f64 {
        self.reward_clipped(state, &self.spec().clip_action(action))
    }

    fn is_terminal(&self, state: &[f64]) -> bool;

    /// Transition function on an already clipped action.
    fn transition(&self, state: &[f64], action: &[f64]) -> Vec<f64>;

    /// Reward on an already clipped action.
    fn reward_clipped(&self, state: &[f64], action: &[f64]) -> f64;

    fn check(&self, state: &[f64], action: &[f64]) -> Result<()> {
        let spec = self.spec();
        if state.len() != spec.state_dim || action.len() != spec.action_dim {
            return error::config("state/action length does not match the environment");
        }
        if action.iter().any(|a| !a.is_finite()) {
            return error::argument("action must be finite");
        }
        Ok(())
    }
}
