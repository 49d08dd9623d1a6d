use std::path::Path;
use std::time::Instant;

use femrl_core::envs::{ContinuousEnv, Environment};
use femrl_core::nn::{mlp_to_bytes, Adam};
use femrl_core::par;
use femrl_core::policy::{
    fit_value_fn, normalize_advantages, ppo_update, trpo_update, GaussianPolicy, TrpoDiagnostics, ValueFunction,
};
use femrl_core::rng::{Rng, SeedTree};
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::eval::evaluate_policy;
use crate::femrl::{new_policy, new_value_fn, TrpoTally};
use crate::metrics::{FailureRecord, JsonlWriter, MetricsRecord, RunSummary};
use crate::rollout::EnvRunner;

/// One data-collecting learner: a centralized agent or a federated client.
struct Learner {
    runner: EnvRunner,
    value_fn: ValueFunction,
    fit_rng: Rng,
    adam: Adam,
}

enum Update {
    Trpo(TrpoDiagnostics),
    Ppo,
}

impl Learner {
    fn new(cfg: &ExperimentConfig, env: &dyn Environment, tree: &SeedTree, k: u64, n_params: usize) -> Result<Self> {
        Ok(Self {
            runner: EnvRunner::new(tree.child("client").index(k).rng()),
            value_fn: new_value_fn(cfg, env, &tree.child("value").index(k))?,
            fit_rng: tree.child("fit").index(k).rng(),
            adam: Adam::new(n_params, cfg.ppo.lr),
        })
    }

    /// Collects `steps` with `policy` and improves it in place.
    fn local_round(
        &mut self,
        cfg: &ExperimentConfig,
        env: &dyn Environment,
        policy: &mut GaussianPolicy,
        steps: usize,
        ppo: bool,
    ) -> Result<Update> {
        let mut batch = self.runner.collect(env, policy, steps)?;
        let (gamma, lambda) = if ppo { (cfg.ppo.gamma, cfg.ppo.gae_lambda) } else { (cfg.trpo.gamma, cfg.trpo.gae_lambda) };
        batch.compute_gae(&self.value_fn, gamma, lambda)?;
        normalize_advantages(&mut batch.advantages);
        let update = if ppo {
            ppo_update(policy, &mut self.adam, &batch, &cfg.ppo, &mut self.fit_rng)?;
            Update::Ppo
        } else {
            Update::Trpo(trpo_update(policy, &batch, &cfg.trpo)?)
        };
        fit_value_fn(&mut self.value_fn, &batch.states, &batch.returns, &mut self.fit_rng)?;
        Ok(update)
    }
}

/// Equal-weight average of policy parameters, accumulated as offsets from the first.
pub fn average_policies(policies: &[GaussianPolicy]) -> Result<GaussianPolicy> {
    let first = policies.first().ok_or_else(|| HarnessError::Config("nothing to average".into()))?;
    let base = first.flat_params();
    let mut offset = vec![0.0; base.len()];
    for p in &policies[1..] {
        let flat = p.flat_params();
        if flat.len() != base.len() {
            return Err(HarnessError::Config("policies differ in shape".into()));
        }
        for ((o, x), b) in offset.iter_mut().zip(&flat).zip(&base) {
            *o += x - b;
        }
    }
    let k = policies.len() as f64;
    let mut out = first.clone();
    out.set_flat_params(&base.iter().zip(&offset).map(|(b, o)| b + o / k).collect::<Vec<_>>())?;
    Ok(out)
}

#[derive(Serialize)]
struct TimingEvent {
    epoch: u64,
    wall_seconds: f64,
}

/// Model-free baselines: centralized TRPO/PPO on pooled batches, or
/// federated TRPO/PPO where every client updates a copy of the global policy
/// on its own data and the server averages the copies.
pub fn run_baseline(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let (federated, ppo) = match cfg.algorithm {
        Algorithm::Trpo => (false, false),
        Algorithm::Ppo => (false, true),
        Algorithm::FedTrpo => (true, false),
        Algorithm::FedPpo => (true, true),
        other => return Err(HarnessError::Config(format!("{} is not a baseline", other.name()))),
    };
    let env = cfg.make_env()?;
    let tree = SeedTree::new(seed);
    let mut policy = new_policy(cfg, &env, &tree)?;
    let (n_learners, steps) = match (federated, ppo) {
        (true, _) => (cfg.fed.clients, cfg.fed.env_steps_per_epoch),
        (false, false) => (1, cfg.trpo.batch_size),
        (false, true) => (1, cfg.ppo.steps_per_epoch),
    };
    let mut learners = (0..n_learners)
        .map(|k| Learner::new(cfg, &env, &tree, k as u64, policy.num_params()))
        .collect::<Result<Vec<_>>>()?;
    let per_epoch = (n_learners * steps) as u64;
    let epochs = cfg.total_env_step_budget / per_epoch.max(1);
    let policy_bytes = (mlp_to_bytes(&policy.mean_net).len() + 8 * policy.action_dim()) as u64;

    let mut metrics = JsonlWriter::create(&dir.join("metrics.jsonl"))?;
    let mut timing = JsonlWriter::create(&dir.join("timing.jsonl"))?;
    let mut records = Vec::new();
    let mut env_steps = 0;
    for epoch in 1..=epochs {
        let start = Instant::now();
        let result = baseline_epoch(cfg, &env, &mut policy, &mut learners, steps, ppo);
        let tally = match result {
            Ok(t) => t,
            Err(e) => {
                metrics.append(&FailureRecord { failure: e.to_string(), epoch })?;
                return Err(e);
            }
        };
        env_steps += per_epoch;
        let eval = evaluate_policy(&policy, &env, cfg.eval_episodes, tree.child("eval").seed())?;
        let rec = MetricsRecord {
            epoch,
            env_steps,
            eval_return_mean: eval.mean,
            eval_return_std: eval.std,
            communication_bytes: if federated { 2 * policy_bytes * n_learners as u64 } else { 0 },
            trpo_kl: tally.mean_kl(),
            trpo_accepted: tally.accepted,
            trpo_rejected: tally.rejected,
            ..Default::default()
        };
        log::info!("{} seed {seed} epoch {epoch}: return {:.2}", cfg.algorithm.name(), rec.eval_return_mean);
        metrics.append(&rec)?;
        timing.append(&TimingEvent { epoch, wall_seconds: start.elapsed().as_secs_f64() })?;
        records.push(rec);
    }
    Ok(RunSummary::new(cfg.algorithm.name(), seed, dir, records))
}

fn baseline_epoch(
    cfg: &ExperimentConfig,
    env: &ContinuousEnv,
    policy: &mut GaussianPolicy,
    learners: &mut [Learner],
    steps: usize,
    ppo: bool,
) -> Result<TrpoTally> {
    let global = policy.clone();
    let results = par::map_mut(learners, |l| {
        let mut local = global.clone();
        l.local_round(cfg, env, &mut local, steps, ppo).map(|u| (local, u))
    });
    let mut tally = TrpoTally::default();
    let mut locals = Vec::with_capacity(results.len());
    for r in results {
        let (local, update) = r?;
        if let Update::Trpo(d) = &update {
            tally.add(d);
        }
        locals.push(local);
    }
    *policy = average_policies(&locals)?;
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_identical_policies_is_identity() {
        let p = GaussianPolicy::new(3, 1, &[8], &mut SeedTree::new(0).rng()).unwrap();
        let avg = average_policies(&[p.clone(), p.clone(), p.clone()]).unwrap();
        assert_eq!(avg, p);
    }
}
