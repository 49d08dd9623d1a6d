use serde::{Deserialize, Serialize};

use crate::envs::TabularMdp;
use crate::error::{self, Result};
use crate::nn::Matrix;

const ROW_TOL: f64 = 1e-12;

/// Stochastic policy table `π[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 || rows.iter().any(|r| r.len() != n_actions) {
            return error::config("policy table must be a non-empty rectangle");
        }
        for r in &rows {
            if r.iter().any(|p| !(*p >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                return error::config("policy rows must be distributions");
            }
        }
        Ok(Self { n_states, n_actions, probs: rows.concat() })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    /// Puts all mass on `actions[s]` in each state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.iter().any(|&a| a >= n_actions) {
            return error::config("action index out of range");
        }
        let rows = actions
            .iter()
            .map(|&a| (0..n_actions).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// `w·self + (1−w)·other`, row by row.
    pub fn mix(&self, other: &TabularPolicy, w: f64) -> Result<Self> {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return error::argument("policies differ in shape");
        }
        let probs = self.probs.iter().zip(&other.probs).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        Ok(Self { n_states: self.n_states, n_actions: self.n_actions, probs })
    }

    /// Uniform average of several policies.
    pub fn average(policies: &[&TabularPolicy]) -> Result<Self> {
        let first = match policies.first() {
            Some(p) => *p,
            None => return error::argument("nothing to average"),
        };
        if policies.iter().any(|p| p.n_states != first.n_states || p.n_actions != first.n_actions) {
            return error::argument("policies differ in shape");
        }
        let k = policies.len() as f64;
        let mut probs = vec![0.0; first.probs.len()];
        for p in policies {
            for (a, b) in probs.iter_mut().zip(&p.probs) {
                *a += b;
            }
        }
        probs.iter_mut().for_each(|x| *x /= k);
        Ok(Self { n_states: first.n_states, n_actions: first.n_actions, probs })
    }

    pub(crate) fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return error::config("policy shape does not match the MDP");
        }
        Ok(())
    }
}

/// `½ Σ |pᵢ − qᵢ|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return error::argument("distributions have different support sizes");
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// State-to-state kernel `P_π[s][s'] = Σ_a π(a|s) T(s'|s,a)`.
pub fn policy_matrix(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<Matrix> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let mut p = Matrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (dst, t) in p.row_mut(s).iter_mut().zip(mdp.transition_row(s, a)) {
                *dst += w * t;
            }
        }
    }
    Ok(p)
}

/// `v = (I − γP_π)⁻¹ r_π`.
pub fn state_values(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<Vec<f64>> {
    let p = policy_matrix(mdp, pi)?;
    let n = mdp.n_states();
    let mut a = Matrix::identity(n);
    for s in 0..n {
        for t in 0..n {
            a.set(s, t, a.get(s, t) - mdp.gamma() * p.get(s, t));
        }
    }
    let r: Vec<f64> = (0..n).map(|s| (0..mdp.n_actions()).map(|x| pi.prob(s, x) * mdp.reward(s, x)).sum()).collect();
    a.solve(&r)
}

/// `V = ρ₀ · (I − γP_π)⁻¹ r_π`.
pub fn exact_value(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<f64> {
    let v = state_values(mdp, pi)?;
    Ok(mdp.initial().iter().zip(&v).map(|(a, b)| a * b).sum())
}

/// Unnormalized discounted visitation `ρ_π = Σₜ γᵗ P(S_t = ·)`, total mass
/// `1/(1−γ)`.
pub fn discounted_visitation(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<Vec<f64>> {
    let p = policy_matrix(mdp, pi)?;
    let n = mdp.n_states();
    let mut a = Matrix::identity(n);
    for s in 0..n {
        for t in 0..n {
            a.set(s, t, a.get(s, t) - mdp.gamma() * p.get(t, s));
        }
    }
    let rho = a.solve(mdp.initial())?;
    Ok(rho.into_iter().map(|x| x.max(0.0)).collect())
}
