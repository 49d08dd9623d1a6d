use std::path::Path;
use std::time::Instant;

use femrl_core::dynamics::DynamicsModel;
use femrl_core::envs::{ContinuousEnv, Environment};
use femrl_core::federation::{
    client_sample, estimate_gamma, fed_en_learning, generate_fictitious_data, sync_policies, Aggregation,
    ClientState, RoundReport, SampleCadence, ServerState,
};
use femrl_core::nn::Matrix;
use femrl_core::par;
use femrl_core::policy::{
    fit_value_fn, normalize_advantages, trpo_update, GaussianPolicy, TrpoDiagnostics, TvdEstimator, ValueFunction,
};
use femrl_core::rng::SeedTree;
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::eval::evaluate_policy;
use crate::metrics::{FailureRecord, JsonlWriter, MetricsRecord, RunSummary};

/// Quadrature and Monte Carlo settings used for Γ during training.
pub const GAMMA_ESTIMATOR: TvdEstimator = TvdEstimator { intervals_per_piece: 400, mc_samples: 10_000 };

#[derive(Serialize)]
struct RoundEvent<'a> {
    epoch: u64,
    inner: usize,
    #[serde(flatten)]
    report: &'a RoundReport,
}

#[derive(Serialize)]
struct TimingEvent {
    epoch: u64,
    wall_seconds: f64,
}

/// Real steps one epoch consumes.
pub fn steps_per_epoch(cfg: &ExperimentConfig) -> u64 {
    let per_call = (cfg.fed.clients * cfg.fed.env_steps_per_epoch) as u64;
    match cfg.fed.sample_cadence {
        SampleCadence::PerEpoch => per_call,
        SampleCadence::PerRound => per_call * cfg.fed.n_inner as u64,
    }
}

/// Training epochs that fit in the real-step budget, capped by `n_outer`.
pub fn epochs_within_budget(cfg: &ExperimentConfig, per_epoch: u64) -> u64 {
    (cfg.total_env_step_budget / per_epoch.max(1)).min(cfg.fed.n_outer as u64)
}

/// Probe states for Γ, drawn from ρ₀ on their own stream.
pub fn probe_states(env: &dyn Environment, n: usize, tree: &SeedTree) -> Result<Matrix> {
    let mut rng = tree.child("probe").rng();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| env.reset(&mut rng)).collect();
    Ok(Matrix::from_rows(&rows)?)
}

pub(crate) fn new_policy(cfg: &ExperimentConfig, env: &dyn Environment, tree: &SeedTree) -> Result<GaussianPolicy> {
    let spec = env.spec();
    Ok(GaussianPolicy::new(spec.state_dim, spec.action_dim, &cfg.policy.hidden, &mut tree.child("policy").rng())?)
}

pub(crate) fn new_value_fn(cfg: &ExperimentConfig, env: &dyn Environment, tree: &SeedTree) -> Result<ValueFunction> {
    let v = &cfg.value;
    Ok(ValueFunction::new(env.spec().state_dim, &v.hidden, v.lr, v.epochs, v.minibatch, &mut tree.rng())?)
}

/// Summary of the policy updates made in one epoch.
#[derive(Debug, Default)]
pub(crate) struct TrpoTally {
    pub accepted: u64,
    pub rejected: u64,
    kl_sum: f64,
}

impl TrpoTally {
    pub fn add(&mut self, d: &TrpoDiagnostics) {
        if d.accepted {
            self.accepted += 1;
            self.kl_sum += d.kl;
        } else {
            self.rejected += 1;
        }
    }

    pub fn mean_kl(&self) -> Option<f64> {
        (self.accepted > 0).then(|| self.kl_sum / self.accepted as f64)
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    env: ContinuousEnv,
    tree: SeedTree,
    server: ServerState,
    clients: Vec<ClientState>,
    value_fn: ValueFunction,
    probes: Matrix,
    env_steps: u64,
    fictitious_steps: u64,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig, seed: u64) -> Result<Self> {
        let env = cfg.make_env()?;
        let tree = SeedTree::new(seed);
        let spec = env.spec().clone();
        let policy = new_policy(cfg, &env, &tree)?;
        let value_fn = new_value_fn(cfg, &env, &tree.child("value"))?;
        let student =
            DynamicsModel::new(spec.state_dim, spec.action_dim, &cfg.dynamics.hidden, &mut tree.child("student").rng())?;
        let client_tree = tree.child("client");
        let clients = (0..cfg.fed.clients)
            .map(|k| {
                ClientState::new(k, cfg.fed.buffer_capacity, policy.clone(), student.clone(), client_tree.index(k as u64).rng())
            })
            .collect();
        let server = ServerState::new(student, policy, tree.child("server").rng());
        let probes = probe_states(&env, cfg.fed.probe_states, &tree)?;
        Ok(Self { cfg, env, tree, server, clients, value_fn, probes, env_steps: 0, fictitious_steps: 0 })
    }

    fn sample_clients(&mut self) -> Result<()> {
        let (env, steps) = (&self.env, self.cfg.fed.env_steps_per_epoch);
        par::map_mut(&mut self.clients, |c| client_sample(c, env, steps)).into_iter().collect::<femrl_core::Result<Vec<_>>>()?;
        self.env_steps += (self.clients.len() * steps) as u64;
        Ok(())
    }

    fn policy_step(&mut self, aggregation: Aggregation, tally: &mut TrpoTally) -> Result<u64> {
        let fed = &self.cfg.fed;
        let mut rng = self.server.rng.clone();
        let model = self.server.planning_model(aggregation)?;
        let mut data =
            generate_fictitious_data(model, &self.server.policy, &self.env, fed.rollouts_per_generation, fed.n_rollout, &mut rng)?;
        self.server.rng = rng;
        self.server.divergences += data.divergences as u64;
        let batch = &mut data.batch;
        if batch.len() < 2 {
            return Ok(data.divergences as u64);
        }
        self.fictitious_steps += batch.len() as u64;
        batch.compute_gae(&self.value_fn, self.cfg.trpo.gamma, self.cfg.trpo.gae_lambda)?;
        normalize_advantages(&mut batch.advantages);
        let diag = trpo_update(&mut self.server.policy, batch, &self.cfg.trpo)?;
        if let Some(f) = diag.failure {
            log::debug!("policy update rejected: {f:?}");
        }
        if diag.accepted {
            self.server.policy_version += 1;
        }
        tally.add(&diag);
        fit_value_fn(&mut self.value_fn, &batch.states, &batch.returns, &mut self.server.rng)?;
        Ok(data.divergences as u64)
    }

    fn epoch(&mut self, epoch: u64, events: &mut JsonlWriter) -> Result<MetricsRecord> {
        let cfg = self.cfg;
        let aggregation = match cfg.algorithm {
            Algorithm::FemrlFedavg => Aggregation::Fedavg,
            _ => cfg.fed.aggregation,
        };
        let mut fed = cfg.fed.clone();
        fed.aggregation = aggregation;
        if fed.sample_cadence == SampleCadence::PerEpoch {
            self.sample_clients()?;
        }
        let bytes_before = self.server.communication_bytes;
        let mut tally = TrpoTally::default();
        let mut divergences = 0;
        let mut last_round: Option<RoundReport> = None;
        for inner in 0..fed.n_inner {
            if fed.sample_cadence == SampleCadence::PerRound {
                self.sample_clients()?;
            }
            let reports = fed_en_learning(&mut self.server, &mut self.clients, &self.env, &fed, cfg.dynamics.horizon)?;
            for r in &reports {
                events.append(&RoundEvent { epoch, inner, report: r })?;
            }
            last_round = reports.into_iter().last();
            for _ in 0..fed.policy_steps {
                divergences += self.policy_step(aggregation, &mut tally)?;
            }
        }
        let version = self.server.policy_version;
        sync_policies(&self.server.policy, version, &mut self.clients, fed.alpha, &mut self.server.rng)?;
        let policy_bytes = femrl_core::nn::mlp_to_bytes(&self.server.policy.mean_net).len() as u64
            + 8 * self.server.policy.action_dim() as u64;
        self.server.communication_bytes += policy_bytes * femrl_core::federation::sync_count(fed.alpha, fed.clients) as u64;
        self.server.epoch += 1;

        let policies: Vec<&GaussianPolicy> = self.clients.iter().map(|c| &c.sample_policy).collect();
        let mut gamma_rng = self.tree.child("gamma").index(epoch).rng();
        let gamma = estimate_gamma(&policies, &self.probes, &GAMMA_ESTIMATOR, &mut gamma_rng)?.gamma;
        let eval = evaluate_policy(&self.server.policy, &self.env, cfg.eval_episodes, self.tree.child("eval").seed())?;

        let dynamics_loss = last_round.as_ref().and_then(|r| {
            let losses: Vec<f64> = r.client_losses.iter().flatten().copied().collect();
            (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64)
        });
        let distill_loss = last_round.as_ref().and_then(|r| r.distill_losses.last().copied());
        Ok(MetricsRecord {
            epoch,
            env_steps: self.env_steps,
            fictitious_steps: self.fictitious_steps,
            eval_return_mean: eval.mean,
            eval_return_std: eval.std,
            dynamics_loss,
            distill_loss,
            gamma: Some(gamma),
            communication_bytes: self.server.communication_bytes - bytes_before,
            trpo_kl: tally.mean_kl(),
            trpo_accepted: tally.accepted,
            trpo_rejected: tally.rejected,
            model_divergences: divergences,
        })
    }
}

/// Drives the loop "sample → (federated model learning → G policy updates) × n_inner → sync"
/// for as many epochs as the real-step budget allows. Writes `metrics.jsonl`,
/// `rounds.jsonl` and `timing.jsonl` into `dir`.
pub fn run_femrl(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunSummary> {
    if !matches!(cfg.algorithm, Algorithm::Femrl | Algorithm::FemrlFedavg) {
        return Err(HarnessError::Config("run_femrl needs the femrl or femrl_fedavg algorithm".into()));
    }
    cfg.validate()?;
    let mut metrics = JsonlWriter::create(&dir.join("metrics.jsonl"))?;
    let mut events = JsonlWriter::create(&dir.join("rounds.jsonl"))?;
    let mut timing = JsonlWriter::create(&dir.join("timing.jsonl"))?;
    let epochs = epochs_within_budget(cfg, steps_per_epoch(cfg));
    let mut records = Vec::new();
    let mut run = Run::new(cfg, seed)?;
    for epoch in 1..=epochs {
        let start = Instant::now();
        match run.epoch(epoch, &mut events) {
            Ok(rec) => {
                log::info!("{} seed {seed} epoch {epoch}: return {:.2}", cfg.algorithm.name(), rec.eval_return_mean);
                metrics.append(&rec)?;
                timing.append(&TimingEvent { epoch, wall_seconds: start.elapsed().as_secs_f64() })?;
                records.push(rec);
            }
            Err(e) => {
                metrics.append(&FailureRecord { failure: e.to_string(), epoch })?;
                return Err(e);
            }
        }
    }
    Ok(RunSummary::new(cfg.algorithm.name(), seed, dir, records))
}
