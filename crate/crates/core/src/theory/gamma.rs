use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::federation::{gamma_formula, sync_count};

use super::exact::{tvd, TabularPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub alpha: f64,
    /// Clients holding the new policy, `⌊αK⌉`.
    pub updated_clients: usize,
    /// `Σₖ E_s D_TV(π̄_D ‖ π_D^k)` summed over the explicit population.
    pub gamma_exact: f64,
    /// `α(1−α)·K·E_s D_TV(π_old ‖ π_new)`.
    pub gamma_formula: f64,
    pub d_tv: f64,
}

/// Γ over the population in which `⌊αK⌉` clients hold `pi_new` and the rest
/// `pi_old`, for each `α`. Per-state TVDs are averaged with `state_weights`.
pub fn gamma_curve(
    pi_old: &TabularPolicy,
    pi_new: &TabularPolicy,
    clients: usize,
    alphas: &[f64],
    state_weights: &[f64],
) -> Result<Vec<GammaPoint>> {
    if clients < 2 {
        return error::argument("the Γ curve needs at least two clients");
    }
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return error::argument("alpha values must lie in [0, 1]");
    }
    let n_s = pi_old.n_states();
    if state_weights.len() != n_s || pi_new.n_states() != n_s || pi_new.n_actions() != pi_old.n_actions() {
        return error::argument("policies and state weights disagree in shape");
    }
    let expect = |f: &dyn Fn(usize) -> Result<f64>| -> Result<f64> {
        let mut acc = 0.0;
        for (s, w) in state_weights.iter().enumerate() {
            acc += w * f(s)?;
        }
        Ok(acc)
    };
    let d_tv = expect(&|s| tvd(pi_old.row(s), pi_new.row(s)))?;
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let n_new = sync_count(alpha, clients);
        let population: Vec<&TabularPolicy> = (0..clients).map(|k| if k < n_new { pi_new } else { pi_old }).collect();
        let mean = TabularPolicy::average(&population)?;
        let mut gamma_exact = 0.0;
        for member in &population {
            gamma_exact += expect(&|s| tvd(mean.row(s), member.row(s)))?;
        }
        out.push(GammaPoint {
            alpha,
            updated_clients: n_new,
            gamma_exact,
            gamma_formula: gamma_formula(alpha, clients, d_tv),
            d_tv,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_population_sum_is_twice_the_closed_form() {
        let old = TabularPolicy::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let new = TabularPolicy::new(vec![vec![0.6, 0.4], vec![0.2, 0.8]]).unwrap();
        let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let curve = gamma_curve(&old, &new, 10, &alphas, &[0.5, 0.5]).unwrap();
        for p in &curve {
            assert!((p.gamma_exact - 2.0 * p.gamma_formula).abs() < 1e-12, "{p:?}");
        }
        assert!(curve[0].gamma_exact.abs() < 1e-12 && curve[10].gamma_exact.abs() < 1e-12);
    }
}
