use serde::{Deserialize, Serialize};

use crate::error::{self, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Ensemble of client models distilled into a student.
    Distill,
    /// Parameter averaging of client models.
    Fedavg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCadence {
    /// Clients collect real data once per outer epoch.
    PerEpoch,
    /// Clients collect real data before every federated learning call.
    PerRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FedConfig {
    /// Number of clients `K`.
    pub clients: usize,
    /// Policy synchronization rate `α`.
    pub alpha: f64,
    /// Local update steps `E`.
    pub local_steps: usize,
    /// Federated rounds per learning call `T_c`.
    pub rounds: usize,
    /// Policy updates per inner loop `G`.
    pub policy_steps: usize,
    pub n_inner: usize,
    pub n_outer: usize,
    /// Fictitious steps per rollout.
    pub n_rollout: usize,
    pub rollouts_per_generation: usize,
    pub n_distill: usize,
    pub local_batch: usize,
    pub local_lr: f64,
    pub distill_batch: usize,
    pub distill_lr: f64,
    pub env_steps_per_epoch: usize,
    pub buffer_capacity: usize,
    pub aggregation: Aggregation,
    pub sample_cadence: SampleCadence,
    pub warm_start_student: bool,
    pub probe_states: usize,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            clients: 10,
            alpha: 0.3,
            local_steps: 80,
            rounds: 5,
            policy_steps: 20,
            n_inner: 20,
            n_outer: 1000,
            n_rollout: 200,
            rollouts_per_generation: 25,
            n_distill: 40,
            local_batch: 128,
            local_lr: 1e-3,
            distill_batch: 128,
            distill_lr: 1e-3,
            env_steps_per_epoch: 500,
            buffer_capacity: 10_000,
            aggregation: Aggregation::Distill,
            sample_cadence: SampleCadence::PerEpoch,
            warm_start_student: true,
            probe_states: 32,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return error::config("alpha must lie in [0, 1]");
        }
        let counts = [
            ("clients", self.clients),
            ("rounds", self.rounds),
            ("policy_steps", self.policy_steps),
            ("n_inner", self.n_inner),
            ("n_outer", self.n_outer),
            ("n_rollout", self.n_rollout),
            ("rollouts_per_generation", self.rollouts_per_generation),
            ("local_batch", self.local_batch),
            ("distill_batch", self.distill_batch),
            ("env_steps_per_epoch", self.env_steps_per_epoch),
            ("buffer_capacity", self.buffer_capacity),
            ("probe_states", self.probe_states),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return error::config(format!("{name} must be at least 1"));
        }
        if !(self.local_lr > 0.0) || !(self.distill_lr > 0.0) {
            return error::config("learning rates must be positive");
        }
        Ok(())
    }
}
