use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, EnsembleModel, NormStats, TransitionModel};
use crate::envs::Environment;
use crate::error::{self, Result};
use crate::nn::{mlp_to_bytes, Adam, Gradients, Matrix};
use crate::par;
use crate::policy::GaussianPolicy;
use crate::rng::Rng;

use super::client::{client_local_update, ClientState, LocalUpdate};
use super::config::{Aggregation, FedConfig};
use super::fictitious::generate_fictitious_data;

/// Server-side state: the student model `w̄`, the latest ensemble and the
/// global policy.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub student: DynamicsModel,
    pub ensemble: Option<EnsembleModel>,
    pub policy: GaussianPolicy,
    /// Number of accepted policy updates so far.
    pub policy_version: u64,
    pub epoch: u64,
    pub round: u64,
    pub rng: Rng,
    pub communication_bytes: u64,
    pub divergences: u64,
}

impl ServerState {
    pub fn new(student: DynamicsModel, policy: GaussianPolicy, rng: Rng) -> Self {
        Self {
            student,
            ensemble: None,
            policy,
            policy_version: 0,
            epoch: 0,
            round: 0,
            rng,
            communication_bytes: 0,
            divergences: 0,
        }
    }

    /// The model the policy trains against: the ensemble under distillation,
    /// the averaged student under FedAvg.
    pub fn planning_model(&self, aggregation: Aggregation) -> Result<&dyn TransitionModel> {
        match (aggregation, &self.ensemble) {
            (Aggregation::Distill, Some(e)) => Ok(e),
            (Aggregation::Distill, None) => error::argument("no ensemble has been trained yet"),
            (Aggregation::Fedavg, _) => Ok(&self.student),
        }
    }
}

/// Per-round record of one federated learning round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u64,
    /// Final local training loss per client; `None` for skipped clients.
    pub client_losses: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
    pub distill_losses: Vec<f64>,
    pub bytes: u64,
}

/// Elementwise parameter mean with equal weights, accumulated as offsets
/// from the first model; statistics are pooled.
pub fn fedavg_aggregate(models: &[DynamicsModel]) -> Result<DynamicsModel> {
    let first = match models.first() {
        Some(m) => m,
        None => return error::config("nothing to average"),
    };
    if models.iter().any(|m| !m.same_shape(first)) {
        return error::config("models to average differ in shape");
    }
    let k = models.len() as f64;
    let base = first.net.params();
    let mut offset = vec![0.0; base.len()];
    for m in &models[1..] {
        for ((o, x), b) in offset.iter_mut().zip(m.net.params()).zip(base) {
            *o += x - b;
        }
    }
    let params: Vec<f64> = base.iter().zip(&offset).map(|(b, o)| b + o / k).collect();
    let mut out = first.clone();
    out.net.set_params(&params)?;
    out.stats = NormStats::pooled(&models.iter().map(|m| m.stats.clone()).collect::<Vec<_>>())?;
    Ok(out)
}

/// Mean of `‖T̂(s,a; teacher mean) − T̂(s,a; w̄)‖₂` over the rows.
pub fn distill_loss(student: &DynamicsModel, ensemble: &EnsembleModel, states: &Matrix, actions: &Matrix) -> Result<f64> {
    let target = ensemble.mean_predict_batch(states, actions)?;
    let pred = student.predict_batch(states, actions)?;
    let n = states.rows() as f64;
    Ok((0..states.rows())
        .map(|r| pred.row(r).iter().zip(target.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum::<f64>()
        / n)
}

/// Fits the student to the ensemble's mean prediction on fictitious data
/// generated by rolling `policy` through the ensemble. Returns the minibatch
/// loss before each of the `cfg.n_distill` Adam steps.
pub fn distill_student(
    student: &mut DynamicsModel,
    ensemble: &EnsembleModel,
    policy: &GaussianPolicy,
    env: &dyn Environment,
    cfg: &FedConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return error::argument("empty ensemble");
    }
    let data = generate_fictitious_data(ensemble, policy, env, cfg.rollouts_per_generation, cfg.n_rollout, rng)?;
    if data.batch.is_empty() {
        return Ok(Vec::new());
    }
    let states = data.batch.state_matrix()?;
    let clipped: Vec<Vec<f64>> = data.batch.actions.iter().map(|a| env.spec().clip_action(a)).collect();
    let actions = Matrix::from_rows(&clipped)?;
    let targets = ensemble.mean_predict_batch(&states, &actions)?;
    student.stats = ensemble.server_stats().clone();
    distill_on(student, &states, &actions, &targets, cfg.n_distill, cfg.distill_batch, cfg.distill_lr, rng)
}

/// Adam regression of the student's next-state prediction onto `targets`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn distill_on(
    student: &mut DynamicsModel,
    states: &Matrix,
    actions: &Matrix,
    targets: &Matrix,
    steps: usize,
    batch: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let n = states.rows();
    let sd = student.state_dim();
    let std = student.stats.std();
    let mut adam = Adam::new(student.net.param_count(), lr);
    let mut grads = Gradients::zeros_like(&student.net);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let idx: Vec<usize> = (0..batch.min(n)).map(|_| rng.random_range(0..n)).collect();
        let s = Matrix::from_rows(&idx.iter().map(|&i| states.row(i)).collect::<Vec<_>>())?;
        let a = Matrix::from_rows(&idx.iter().map(|&i| actions.row(i)).collect::<Vec<_>>())?;
        let x = student.inputs(&s, &a)?;
        let cache = student.net.forward_cached(x)?;
        let y = cache.output();
        let m = idx.len() as f64;
        let mut out_grad = Matrix::zeros(idx.len(), sd);
        let mut loss = 0.0;
        for (r, &i) in idx.iter().enumerate() {
            let err: Vec<f64> = (0..sd)
                .map(|k| s.get(r, k) + y.get(r, k) * std[k] + student.stats.mean()[k] - targets.get(i, k))
                .collect();
            let norm = err.iter().map(|e| e * e).sum::<f64>().sqrt();
            loss += norm / m;
            if norm > 1e-12 {
                for k in 0..sd {
                    out_grad.set(r, k, err[k] / norm * std[k] / m);
                }
            }
        }
        losses.push(loss);
        grads.zero();
        student.net.backward(&cache, &out_grad, &mut grads)?;
        adam.step(student.net.params_mut(), &grads.values)?;
    }
    Ok(losses)
}

/// `T_c` rounds of: send `w̄` to every client, run local updates in parallel,
/// collect the ensemble, then aggregate by distillation or averaging.
pub fn fed_en_learning(
    server: &mut ServerState,
    clients: &mut [ClientState],
    env: &dyn Environment,
    cfg: &FedConfig,
    horizon: usize,
) -> Result<Vec<RoundReport>> {
    if clients.is_empty() {
        return error::config("no clients");
    }
    if !cfg.warm_start_student {
        let hidden: Vec<usize> = server.student.net.sizes()[1..server.student.net.sizes().len() - 1].to_vec();
        let spec = env.spec();
        server.student = DynamicsModel::new(spec.state_dim, spec.action_dim, &hidden, &mut server.rng)?;
    }
    let pooled: Vec<NormStats> = clients.iter().map(|c| c.stats.clone()).collect();
    server.student.stats = NormStats::pooled(&pooled)?;
    let model_bytes = mlp_to_bytes(&server.student.net).len() as u64;
    let mut reports = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let init = server.student.clone();
        let updates: Vec<Result<LocalUpdate>> = par::map_mut(clients, |c| {
            client_local_update(c, &init, cfg.local_steps, cfg.local_batch, horizon, cfg.local_lr)
        });
        let updates = updates.into_iter().collect::<Result<Vec<_>>>()?;
        let skipped: Vec<usize> =
            updates.iter().zip(clients.iter()).filter(|(u, _)| u.skipped).map(|(_, c)| c.id).collect();
        if skipped.len() == updates.len() {
            return error::argument("every client skipped its local update");
        }
        let client_losses = updates.iter().map(|u| if u.skipped { None } else { u.losses.last().copied() }).collect();
        let members: Vec<DynamicsModel> = updates.into_iter().map(|u| u.model).collect();
        let bytes = 2 * model_bytes * members.len() as u64;
        server.communication_bytes += bytes;
        let distill_losses = match cfg.aggregation {
            Aggregation::Distill => {
                let ensemble = EnsembleModel::new(members)?;
                let mut student = server.student.clone();
                let losses = distill_student(&mut student, &ensemble, &server.policy, env, cfg, &mut server.rng)?;
                server.student = student;
                server.ensemble = Some(ensemble);
                losses
            }
            Aggregation::Fedavg => {
                server.student = fedavg_aggregate(&members)?;
                server.ensemble = Some(EnsembleModel::new(members)?);
                Vec::new()
            }
        };
        server.round += 1;
        reports.push(RoundReport {
            round: server.round,
            client_losses,
            skipped,
            distill_losses,
            bytes,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn model(seed: u64) -> DynamicsModel {
        DynamicsModel::new(2, 1, &[4], &mut SeedTree::new(seed).rng()).unwrap()
    }

    #[test]
    fn average_of_p_and_minus_p_is_zero() {
        let a = model(1);
        let mut b = a.clone();
        let neg: Vec<f64> = a.net.params().iter().map(|x| -x).collect();
        b.net.set_params(&neg).unwrap();
        let avg = fedavg_aggregate(&[a, b]).unwrap();
        assert!(avg.net.params().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn average_of_identical_is_identity() {
        let a = model(3);
        let avg = fedavg_aggregate(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(avg.net, a.net);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let b = DynamicsModel::new(2, 1, &[5], &mut SeedTree::new(0).rng()).unwrap();
        assert!(matches!(fedavg_aggregate(&[model(0), b]), Err(crate::Error::Config(_))));
    }
}
