use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::tabular::dirichlet_uniform;
use crate::envs::{make_random_tabular_mdp, TabularMdp};
use crate::error::Result;
use crate::par;
use crate::rng::{Rng, SeedTree};

use super::exact::TabularPolicy;
use super::gamma::{gamma_curve, GammaPoint};
use super::lemmas::{check_lemma1, check_lemma2, check_lemma3};

/// Weights with which a model mixes in an independent random kernel.
pub const PERTURBATION_LEVELS: [f64; 3] = [0.01, 0.05, 0.2];

/// Policy with Dirichlet(1) rows.
pub fn random_policy(n_states: usize, n_actions: usize, rng: &mut Rng) -> TabularPolicy {
    let rows = (0..n_states).map(|_| dirichlet_uniform(n_actions, rng)).collect();
    TabularPolicy::new(rows).expect("Dirichlet rows are distributions")
}

/// `T̂ = (1 − w)·T + w·T'` with `T'` an independent Dirichlet(1) kernel.
/// Rows are renormalized to absorb rounding.
pub fn perturb_model(mdp: &TabularMdp, w: f64, rng: &mut Rng) -> Result<TabularMdp> {
    let n = mdp.n_states();
    let mut t = Vec::with_capacity(mdp.transitions().len());
    for row in mdp.transitions().chunks(n) {
        let noise = dirichlet_uniform(n, rng);
        let mixed: Vec<f64> = row.iter().zip(&noise).map(|(a, b)| (1.0 - w) * a + w * b).collect();
        let sum: f64 = mixed.iter().sum();
        t.extend(mixed.into_iter().map(|x| x / sum));
    }
    mdp.with_transitions(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Instance {
    pub mdp: TabularMdp,
    pub model: TabularMdp,
    pub pi: TabularPolicy,
    pub pi_d: TabularPolicy,
    pub perturbation: f64,
}

/// Random MDP with `2..=10` states and `2..=4` actions, a perturbed model
/// and a policy pair where `π` is `π_D` mixed toward another random policy.
pub fn random_lemma1_instance(gamma: f64, perturbation: f64, rng: &mut Rng) -> Result<Lemma1Instance> {
    let n_s = rng.random_range(2..=10);
    let n_a = rng.random_range(2..=4);
    let mdp = make_random_tabular_mdp(n_s, n_a, gamma, rng)?;
    let model = perturb_model(&mdp, perturbation, rng)?;
    let pi_d = random_policy(n_s, n_a, rng);
    let other = random_policy(n_s, n_a, rng);
    let u: f64 = rng.random();
    let pi = other.mix(&pi_d, u)?;
    Ok(Lemma1Instance { mdp, model, pi, pi_d, perturbation })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub instances: usize,
    pub violations: usize,
    pub min_slack: f64,
}

impl LemmaSummary {
    fn from_slacks(slacks: &[(bool, f64)]) -> Self {
        Self {
            instances: slacks.len(),
            violations: slacks.iter().filter(|(ok, _)| !ok).count(),
            min_slack: slacks.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySuiteReport {
    pub seed: u64,
    pub lemma1: LemmaSummary,
    /// Lemma 1 with actions drawn from the sample policy in `ε_m`.
    pub lemma1_behaviour: LemmaSummary,
    pub lemma2: LemmaSummary,
    pub lemma3: LemmaSummary,
    pub gamma_curve: Vec<GammaPoint>,
}

/// Runs `instances` random checks of each lemma plus one Γ curve, all derived
/// from `seed`.
pub fn run_theory_suite(instances: usize, seed: u64) -> Result<TheorySuiteReport> {
    let root = SeedTree::new(seed);
    let l1_tree = root.child("lemma1");
    let l1 = par::map_range(instances, |i| {
        let mut rng = l1_tree.index(i as u64).rng();
        let level = PERTURBATION_LEVELS[i % PERTURBATION_LEVELS.len()];
        let inst = random_lemma1_instance(0.9, level, &mut rng)?;
        check_lemma1(&inst.mdp, &inst.model, &inst.pi, &inst.pi_d)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let l2_tree = root.child("lemma2");
    let l2 = par::map_range(instances, |i| {
        let mut rng = l2_tree.index(i as u64).rng();
        let n = rng.random_range(2..=20);
        let p = dirichlet_uniform(n, &mut rng);
        let q = dirichlet_uniform(n, &mut rng);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let f: Vec<f64> = (0..n).map(|_| scale * rng.random::<f64>()).collect();
        check_lemma2(&p, &q, &f)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let l3_tree = root.child("lemma3");
    let gammas = [0.5, 0.9, 0.99];
    let l3 = par::map_range(instances, |i| {
        let mut rng = l3_tree.index(i as u64).rng();
        let n_s = rng.random_range(2..=10);
        let n_a = rng.random_range(2..=4);
        let mdp = make_random_tabular_mdp(n_s, n_a, gammas[i % 3], &mut rng)?;
        let pi_d = random_policy(n_s, n_a, &mut rng);
        let u: f64 = rng.random();
        let pi = random_policy(n_s, n_a, &mut rng).mix(&pi_d, u)?;
        check_lemma3(&mdp, &pi, &pi_d)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rng = root.child("gamma").rng();
    let old = random_policy(6, 3, &mut rng);
    let new = random_policy(6, 3, &mut rng);
    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let curve = gamma_curve(&old, &new, 10, &alphas, &[1.0 / 6.0; 6])?;

    Ok(TheorySuiteReport {
        seed,
        lemma1: LemmaSummary::from_slacks(&l1.iter().map(|r| (r.bound_holds, r.slack)).collect::<Vec<_>>()),
        lemma1_behaviour: LemmaSummary::from_slacks(
            &l1.iter().map(|r| (r.bound_holds_behaviour, r.slack_behaviour)).collect::<Vec<_>>(),
        ),
        lemma2: LemmaSummary::from_slacks(&l2.iter().map(|o| (o.holds, o.rhs - o.lhs)).collect::<Vec<_>>()),
        lemma3: LemmaSummary::from_slacks(&l3.iter().map(|o| (o.holds, o.rhs - o.lhs)).collect::<Vec<_>>()),
        gamma_curve: curve,
    })
}
