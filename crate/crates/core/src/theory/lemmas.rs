use serde::{Deserialize, Serialize};

use crate::envs::TabularMdp;
use crate::error::{self, Result};

use super::exact::{discounted_visitation, exact_value, tvd, TabularPolicy};

const BOUND_TOL: f64 = 1e-9;

/// Everything [`check_lemma1`] computes for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub v_true: f64,
    pub v_model: f64,
    /// `Σ_s ρ_{π_D}(s) Σ_a π(a|s) D_TV(T(·|s,a) ‖ T̂(·|s,a))` with `ρ` the
    /// unnormalized discounted visitation, so it lies in `[0, 1/(1−γ)]`.
    pub eps_m: f64,
    /// Largest `E_{a∼π} D_TV(T ‖ T̂)` over states visited by `π` or `π_D`.
    pub eps_m_max: f64,
    /// `max_s D_TV(π(·|s) ‖ π_D(·|s))`.
    pub eps_pi: f64,
    /// `E_{s∼ρ_{π_D}/‖ρ_{π_D}‖} D_TV(π(·|s) ‖ π_D(·|s))`.
    pub eps_pi_mean: f64,
    pub b: f64,
    pub bound_holds: bool,
    /// Γ for the two-client population `{π, π_D}`, weighted by the normalized visitation of `π_D`.
    pub gamma: f64,
    pub slack: f64,
    /// Same quantities with actions drawn from `π_D` instead of `π`.
    pub eps_m_behaviour: f64,
    pub eps_m_max_behaviour: f64,
    pub b_behaviour: f64,
    pub bound_holds_behaviour: bool,
    pub slack_behaviour: f64,
}

/// `2γ r_max/(1−γ)·ε_m + 4γ² r_max/(1−γ)³·ε_π·ε_m^max`.
pub fn lemma1_bound(gamma: f64, r_max: f64, eps_m: f64, eps_pi: f64, eps_m_max: f64) -> f64 {
    let g1 = 1.0 - gamma;
    2.0 * gamma * r_max / g1 * eps_m + 4.0 * gamma * gamma * r_max / (g1 * g1 * g1) * eps_pi * eps_m_max
}

/// Computes both sides of the model-return lower bound exactly.
pub fn check_lemma1(mdp: &TabularMdp, model: &TabularMdp, pi: &TabularPolicy, pi_d: &TabularPolicy) -> Result<TheoryReport> {
    if mdp.n_states() != model.n_states() || mdp.n_actions() != model.n_actions() {
        return error::argument("model MDP differs in shape");
    }
    if mdp.rewards() != model.rewards() || mdp.initial() != model.initial() || mdp.gamma() != model.gamma() {
        return error::argument("model MDP must share rewards, initial distribution and discount");
    }
    pi.check_against(mdp)?;
    pi_d.check_against(mdp)?;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let rho_d = discounted_visitation(mdp, pi_d)?;
    let rho_pi = discounted_visitation(mdp, pi)?;
    let mass: f64 = rho_d.iter().sum();

    let mut model_tv = vec![0.0; n_s * n_a];
    for s in 0..n_s {
        for a in 0..n_a {
            model_tv[s * n_a + a] = tvd(mdp.transition_row(s, a), model.transition_row(s, a))?;
        }
    }
    let per_state = |p: &TabularPolicy, s: usize| (0..n_a).map(|a| p.prob(s, a) * model_tv[s * n_a + a]).sum::<f64>();
    let visited = |s: usize| rho_d[s] > 0.0 || rho_pi[s] > 0.0;

    let eps_m: f64 = (0..n_s).map(|s| rho_d[s] * per_state(pi, s)).sum();
    let eps_m_max = (0..n_s).filter(|&s| visited(s)).map(|s| per_state(pi, s)).fold(0.0, f64::max);
    let eps_m_behaviour: f64 = (0..n_s).map(|s| rho_d[s] * per_state(pi_d, s)).sum();
    let eps_m_max_behaviour = (0..n_s).filter(|&s| visited(s)).map(|s| per_state(pi_d, s)).fold(0.0, f64::max);

    let policy_tv: Vec<f64> = (0..n_s).map(|s| tvd(pi.row(s), pi_d.row(s))).collect::<Result<_>>()?;
    let eps_pi = policy_tv.iter().cloned().fold(0.0, f64::max);
    let eps_pi_mean = (0..n_s).map(|s| rho_d[s] / mass * policy_tv[s]).sum();
    let gamma = (0..n_s).map(|s| rho_d[s] / mass * policy_tv[s]).sum::<f64>();

    let v_true = exact_value(mdp, pi)?;
    let v_model = exact_value(model, pi)?;
    let b = lemma1_bound(mdp.gamma(), mdp.r_max(), eps_m, eps_pi, eps_m_max);
    let b_behaviour = lemma1_bound(mdp.gamma(), mdp.r_max(), eps_m_behaviour, eps_pi, eps_m_max_behaviour);
    let slack = v_true - (v_model - b);
    let slack_behaviour = v_true - (v_model - b_behaviour);
    Ok(TheoryReport {
        v_true,
        v_model,
        eps_m,
        eps_m_max,
        eps_pi,
        eps_pi_mean,
        b,
        bound_holds: slack >= -BOUND_TOL,
        gamma,
        slack,
        eps_m_behaviour,
        eps_m_max_behaviour,
        b_behaviour,
        bound_holds_behaviour: slack_behaviour >= -BOUND_TOL,
        slack_behaviour,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Outcome {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `E_p[f] ≤ E_q[f] + ‖p − q‖₁ · max f`.
pub fn check_lemma2(p: &[f64], q: &[f64], f: &[f64]) -> Result<Lemma2Outcome> {
    if p.len() != q.len() || p.len() != f.len() || p.is_empty() {
        return error::argument("p, q and f must have the same non-zero length");
    }
    if f.iter().any(|x| !x.is_finite()) {
        return error::argument("f must be finite");
    }
    let lhs: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    let f_max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rhs = q.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + l1 * f_max;
    Ok(Lemma2Outcome { lhs, rhs, holds: lhs <= rhs + BOUND_TOL })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Outcome {
    /// `‖ρ_π − ρ_{π_D}‖₁`.
    pub lhs: f64,
    /// `2γ/(1−γ)²·ε_π`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_lemma3(mdp: &TabularMdp, pi: &TabularPolicy, pi_d: &TabularPolicy) -> Result<Lemma3Outcome> {
    let rho = discounted_visitation(mdp, pi)?;
    let rho_d = discounted_visitation(mdp, pi_d)?;
    let lhs: f64 = rho.iter().zip(&rho_d).map(|(a, b)| (a - b).abs()).sum();
    let eps_pi = (0..mdp.n_states()).map(|s| tvd(pi.row(s), pi_d.row(s))).collect::<Result<Vec<_>>>()?;
    let eps_pi = eps_pi.into_iter().fold(0.0, f64::max);
    let g = mdp.gamma();
    let rhs = 2.0 * g / ((1.0 - g) * (1.0 - g)) * eps_pi;
    Ok(Lemma3Outcome { lhs, rhs, holds: lhs <= rhs + BOUND_TOL })
}
