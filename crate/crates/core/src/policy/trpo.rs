use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::{Gradients, Matrix};

use super::gae::RolloutBatch;
use super::gaussian::{diag_gaussian_kl, GaussianPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrpoConfig {
    pub max_kl: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub cg_damping: f64,
    pub cg_steps: usize,
    pub batch_size: usize,
    pub backtrack_coef: f64,
    pub backtrack_steps: usize,
    /// Every `fvp_stride`-th state enters the Fisher-vector product.
    pub fvp_stride: usize,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            max_kl: 0.01,
            gamma: 0.99,
            gae_lambda: 0.95,
            cg_damping: 0.1,
            cg_steps: 10,
            batch_size: 5000,
            backtrack_coef: 0.8,
            backtrack_steps: 10,
            fvp_stride: 1,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_kl > 0.0) || !(self.cg_damping >= 0.0) || self.cg_steps == 0 || self.fvp_stride == 0 {
            return error::config("invalid TRPO settings");
        }
        if !(self.backtrack_coef > 0.0 && self.backtrack_coef < 1.0) {
            return error::config("backtrack_coef must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrpoFailure {
    NonFiniteGradient,
    ZeroGradient,
    LineSearchExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrpoDiagnostics {
    pub accepted: bool,
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub expected_improvement: f64,
    pub step_fraction: f64,
    pub line_search_steps: usize,
    pub grad_norm: f64,
    pub failure: Option<TrpoFailure>,
}

struct Prepared {
    states: Matrix,
    actions: Matrix,
    advantages: Vec<f64>,
    old_log_probs: Vec<f64>,
    old_means: Matrix,
    old_log_std: Vec<f64>,
}

fn prepare(policy: &GaussianPolicy, batch: &RolloutBatch) -> Result<Prepared> {
    if batch.is_empty() {
        return error::argument("empty rollout batch");
    }
    if batch.advantages.len() != batch.len() {
        return error::argument("advantages have not been computed");
    }
    let states = batch.state_matrix()?;
    let actions = batch.action_matrix()?;
    let old_means = policy.mean_batch(&states)?;
    let old_log_probs = policy.log_probs_from_means(&old_means, &actions);
    Ok(Prepared {
        states,
        actions,
        advantages: batch.advantages.clone(),
        old_log_probs,
        old_means,
        old_log_std: policy.log_std().to_vec(),
    })
}

/// `mean_t exp(log π(a_t|s_t) − log π_old(a_t|s_t)) · A_t`.
pub fn surrogate(policy: &GaussianPolicy, states: &Matrix, actions: &Matrix, advantages: &[f64], old_log_probs: &[f64]) -> Result<f64> {
    let means = policy.mean_batch(states)?;
    let lps = policy.log_probs_from_means(&means, actions);
    let n = advantages.len() as f64;
    Ok(lps.iter().zip(old_log_probs).zip(advantages).map(|((l, o), a)| (l - o).exp() * a).sum::<f64>() / n)
}

/// Gradient of [`surrogate`] in the flat policy layout.
pub fn surrogate_gradient(
    policy: &GaussianPolicy,
    states: &Matrix,
    actions: &Matrix,
    advantages: &[f64],
    old_log_probs: &[f64],
) -> Result<Vec<f64>> {
    let cache = policy.mean_net.forward_cached(states.clone())?;
    let lps = policy.log_probs_from_means(cache.output(), actions);
    let n = advantages.len() as f64;
    let weights: Vec<f64> =
        lps.iter().zip(old_log_probs).zip(advantages).map(|((l, o), a)| (l - o).exp() * a / n).collect();
    policy.weighted_log_prob_gradient(&cache, actions, &weights)
}

/// Mean over states of `KL(π_old(·|s) ‖ π(·|s))`.
pub fn mean_kl(old_means: &Matrix, old_log_std: &[f64], policy: &GaussianPolicy, states: &Matrix) -> Result<f64> {
    let means = policy.mean_batch(states)?;
    let n = states.rows();
    let total: f64 =
        (0..n).map(|r| diag_gaussian_kl(old_means.row(r), old_log_std, means.row(r), policy.log_std())).sum();
    Ok(total / n as f64)
}

/// `(F + damping·I) v` where `F` is the Fisher information of the mean KL at
/// the current parameters, averaged over the rows of `states`.
pub fn fisher_vector_product(policy: &GaussianPolicy, states: &Matrix, v: &[f64], damping: f64) -> Result<Vec<f64>> {
    let cache = policy.mean_net.forward_cached(states.clone())?;
    fvp_cached(policy, &cache, v, damping)
}

fn fvp_cached(policy: &GaussianPolicy, cache: &crate::nn::ForwardCache, v: &[f64], damping: f64) -> Result<Vec<f64>> {
    let n_mean = policy.mean_net.param_count();
    if v.len() != policy.num_params() {
        return error::argument("vector length does not match the policy parameters");
    }
    let mut jv = policy.mean_net.jvp(cache, &v[..n_mean])?;
    let n = jv.rows() as f64;
    let inv_var: Vec<f64> = policy.log_std().iter().map(|l| (-2.0 * l).exp() / n).collect();
    for r in 0..jv.rows() {
        for (x, w) in jv.row_mut(r).iter_mut().zip(&inv_var) {
            *x *= w;
        }
    }
    let mut g = Gradients::zeros_like(&policy.mean_net);
    policy.mean_net.backward(cache, &jv, &mut g)?;
    let mut out = g.values;
    out.extend(v[n_mean..].iter().map(|x| 2.0 * x));
    for (o, x) in out.iter_mut().zip(v) {
        *o += damping * x;
    }
    Ok(out)
}

/// Conjugate gradient for `A x = b` with `A` given as a matrix-vector product.
/// Stops after `iters` iterations or once the residual norm drops below `tol`.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iters: usize, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr.sqrt() <= tol {
            break;
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One natural-gradient step with a KL-constrained backtracking line search.
/// The batch must carry advantages. On any failure the policy is left
/// untouched and the diagnostics say why.
pub fn trpo_update(policy: &mut GaussianPolicy, batch: &RolloutBatch, cfg: &TrpoConfig) -> Result<TrpoDiagnostics> {
    cfg.validate()?;
    let prep = prepare(policy, batch)?;
    let theta_old = policy.flat_params();
    let surrogate_before = prep.advantages.iter().sum::<f64>() / prep.advantages.len() as f64;
    let mut diag = TrpoDiagnostics {
        accepted: false,
        kl: 0.0,
        surrogate_before,
        surrogate_after: surrogate_before,
        expected_improvement: 0.0,
        step_fraction: 0.0,
        line_search_steps: 0,
        grad_norm: 0.0,
        failure: None,
    };

    let g = surrogate_gradient(policy, &prep.states, &prep.actions, &prep.advantages, &prep.old_log_probs)?;
    diag.grad_norm = dot(&g, &g).sqrt();
    if !diag.grad_norm.is_finite() {
        diag.failure = Some(TrpoFailure::NonFiniteGradient);
        return Ok(diag);
    }
    if diag.grad_norm == 0.0 {
        diag.failure = Some(TrpoFailure::ZeroGradient);
        return Ok(diag);
    }

    let fvp_rows: Vec<&[f64]> = (0..prep.states.rows()).step_by(cfg.fvp_stride).map(|r| prep.states.row(r)).collect();
    let fvp_cache = policy.mean_net.forward_cached(Matrix::from_rows(&fvp_rows)?)?;
    let step_dir = conjugate_gradient(|v| fvp_cached(policy, &fvp_cache, v, cfg.cg_damping), &g, cfg.cg_steps, 1e-10)?;
    let shs = 0.5 * dot(&step_dir, &fvp_cached(policy, &fvp_cache, &step_dir, cfg.cg_damping)?);
    if !(shs > 0.0) || !shs.is_finite() {
        diag.failure = Some(TrpoFailure::NonFiniteGradient);
        return Ok(diag);
    }
    let scale = (cfg.max_kl / shs).sqrt();
    let full_step: Vec<f64> = step_dir.iter().map(|x| x * scale).collect();
    diag.expected_improvement = dot(&g, &full_step);

    let mut frac = 1.0;
    let mut candidate = theta_old.clone();
    for k in 0..cfg.backtrack_steps {
        diag.line_search_steps = k + 1;
        for ((c, t), s) in candidate.iter_mut().zip(&theta_old).zip(&full_step) {
            *c = t + frac * s;
        }
        policy.set_flat_params(&candidate)?;
        let surr = surrogate(policy, &prep.states, &prep.actions, &prep.advantages, &prep.old_log_probs)?;
        let kl = mean_kl(&prep.old_means, &prep.old_log_std, policy, &prep.states)?;
        if surr.is_finite() && kl.is_finite() && surr - surrogate_before >= 0.0 && kl <= cfg.max_kl {
            diag.accepted = true;
            diag.kl = kl;
            diag.surrogate_after = surr;
            diag.step_fraction = frac;
            return Ok(diag);
        }
        frac *= cfg.backtrack_coef;
    }
    policy.set_flat_params(&theta_old)?;
    diag.failure = Some(TrpoFailure::LineSearchExhausted);
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, SeedTree};

    fn setup() -> (GaussianPolicy, Matrix) {
        let mut rng = SeedTree::new(3).rng();
        let mut p = GaussianPolicy::new(3, 2, &[6, 6], &mut rng).unwrap();
        let flat: Vec<f64> = p.flat_params().iter().map(|x| x + 0.3 * standard_normal(&mut rng)).collect();
        p.set_flat_params(&flat).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| standard_normal(&mut rng)).collect()).collect();
        (p, Matrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn fvp_matches_kl_hessian_by_finite_differences() {
        let (p, states) = setup();
        let theta = p.flat_params();
        let old_means = p.mean_batch(&states).unwrap();
        let old_ls = p.log_std().to_vec();
        let mut rng = SeedTree::new(9).rng();
        let v: Vec<f64> = (0..theta.len()).map(|_| standard_normal(&mut rng)).collect();
        let fv = fisher_vector_product(&p, &states, &v, 0.0).unwrap();
        let h = 1e-3;
        let kl_at = |t: f64| {
            let mut q = p.clone();
            let th: Vec<f64> = theta.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            q.set_flat_params(&th).unwrap();
            mean_kl(&old_means, &old_ls, &q, &states).unwrap()
        };
        let vfv_fd = (kl_at(h) - 2.0 * kl_at(0.0) + kl_at(-h)) / (h * h);
        let vfv = dot(&v, &fv);
        assert!((vfv - vfv_fd).abs() < 1e-3 * vfv.abs().max(1.0), "{vfv} vs {vfv_fd}");
    }

    #[test]
    fn cg_solves_small_spd_system() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]]).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = conjugate_gradient(|v| a.matvec(v), &b, 3, 0.0).unwrap();
        let exact = a.solve(&b).unwrap();
        for (u, w) in x.iter().zip(&exact) {
            assert!((u - w).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_advantages_leave_policy_unchanged() {
        let (mut p, states) = setup();
        let mut batch = RolloutBatch::new();
        for r in 0..states.rows() {
            batch.push(states.row(r).to_vec(), vec![0.1, -0.2], 0.0, states.row(r).to_vec(), false, false, 0.0);
        }
        batch.advantages = vec![0.0; batch.len()];
        let before = p.flat_params();
        let d = trpo_update(&mut p, &batch, &TrpoConfig::default()).unwrap();
        assert!(!d.accepted);
        assert_eq!(p.flat_params(), before);
    }
}
