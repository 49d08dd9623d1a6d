use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::Matrix;
use crate::policy::{mixture_tvd, DiagGaussian, GaussianMixture, GaussianPolicy, TvdEstimator};
use crate::rng::Rng;

use super::client::ClientState;

/// `⌊αK⌉` with halves rounded up.
pub fn sync_count(alpha: f64, clients: usize) -> usize {
    ((alpha * clients as f64 + 0.5).floor() as usize).min(clients)
}

/// Gives a snapshot of `policy` to `⌊αK⌉` clients drawn uniformly without
/// replacement. Returns the chosen client indices in draw order.
pub fn sync_policies(
    policy: &GaussianPolicy,
    version: u64,
    clients: &mut [ClientState],
    alpha: f64,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&alpha) {
        return error::config("alpha must lie in [0, 1]");
    }
    let n = sync_count(alpha, clients.len());
    let chosen = sample(rng, clients.len(), n).into_vec();
    for &i in &chosen {
        clients[i].sample_policy = policy.clone();
        clients[i].policy_version = version;
    }
    Ok(chosen)
}

/// `α(1−α)·K·d`, the closed form stated for the two-policy population.
pub fn gamma_formula(alpha: f64, clients: usize, d_tv: f64) -> f64 {
    alpha * (1.0 - alpha) * clients as f64 * d_tv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// `Σₖ E_s[D_TV(π̄_D(·|s) ‖ π_D^k(·|s))]`.
    pub gamma: f64,
    /// Number of distinct sample policies among the clients.
    pub distinct_policies: usize,
}

/// Γ over the clients' sample policies, with `π̄_D` the uniform mixture.
/// Clients holding identical snapshots share one TVD evaluation.
pub fn estimate_gamma(
    policies: &[&GaussianPolicy],
    probe_states: &Matrix,
    est: &TvdEstimator,
    rng: &mut Rng,
) -> Result<GammaEstimate> {
    if policies.is_empty() {
        return error::argument("no policies");
    }
    if probe_states.rows() == 0 {
        return error::argument("no probe states");
    }
    let mut distinct: Vec<(&GaussianPolicy, usize)> = Vec::new();
    for p in policies {
        match distinct.iter_mut().find(|(q, _)| *q == *p) {
            Some((_, c)) => *c += 1,
            None => distinct.push((p, 1)),
        }
    }
    if distinct.len() == 1 {
        return Ok(GammaEstimate { gamma: 0.0, distinct_policies: 1 });
    }
    let k = policies.len() as f64;
    let means: Vec<Matrix> = distinct.iter().map(|(p, _)| p.mean_batch(probe_states)).collect::<Result<_>>()?;
    let stds: Vec<Vec<f64>> = distinct.iter().map(|(p, _)| p.std()).collect();
    let mut total = 0.0;
    for r in 0..probe_states.rows() {
        let comps: Vec<DiagGaussian> = means
            .iter()
            .zip(&stds)
            .map(|(m, s)| DiagGaussian::new(m.row(r).to_vec(), s.clone()))
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = distinct.iter().map(|(_, c)| *c as f64 / k).collect();
        let mixture = GaussianMixture::new(weights, comps.clone())?;
        for (comp, (_, count)) in comps.into_iter().zip(&distinct) {
            total += *count as f64 * mixture_tvd(&mixture, &GaussianMixture::single(comp), est, rng)?;
        }
    }
    Ok(GammaEstimate { gamma: total / probe_states.rows() as f64, distinct_policies: distinct.len() })
}
