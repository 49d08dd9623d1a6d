use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::rng::Rng;

/// Finite MDP `(S, A, T, R, ρ₀, γ)` with dense tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabularMdpDoc", into = "TabularMdpDoc")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `T[s][a][s']` flattened as `(s * A + a) * S + s'`.
    transitions: Vec<f64>,
    /// `R[s][a]` flattened as `s * A + a`.
    rewards: Vec<f64>,
    initial: Vec<f64>,
    gamma: f64,
    r_max: f64,
}

/// JSON document layout: nested arrays for the transition tensor and rewards.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TabularMdpDoc {
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
    initial: Vec<f64>,
    gamma: f64,
    r_max: f64,
}

impl TryFrom<TabularMdpDoc> for TabularMdp {
    type Error = crate::Error;

    fn try_from(doc: TabularMdpDoc) -> Result<Self> {
        let n_states = doc.transitions.len();
        let n_actions = doc.transitions.first().map_or(0, Vec::len);
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for per_state in &doc.transitions {
            if per_state.len() != n_actions {
                return error::config("ragged transition tensor");
            }
            for row in per_state {
                if row.len() != n_states {
                    return error::config("transition row length must equal the number of states");
                }
                transitions.extend_from_slice(row);
            }
        }
        if doc.rewards.len() != n_states || doc.rewards.iter().any(|r| r.len() != n_actions) {
            return error::config("reward table shape does not match the transition tensor");
        }
        let rewards = doc.rewards.concat();
        TabularMdp::new(n_states, n_actions, transitions, rewards, doc.initial, doc.gamma, doc.r_max)
    }
}

impl From<TabularMdp> for TabularMdpDoc {
    fn from(m: TabularMdp) -> Self {
        let (s_n, a_n) = (m.n_states, m.n_actions);
        TabularMdpDoc {
            transitions: (0..s_n)
                .map(|s| (0..a_n).map(|a| m.transition_row(s, a).to_vec()).collect())
                .collect(),
            rewards: (0..s_n).map(|s| m.rewards[s * a_n..(s + 1) * a_n].to_vec()).collect(),
            initial: m.initial,
            gamma: m.gamma,
            r_max: m.r_max,
        }
    }
}

const ROW_TOL: f64 = 1e-12;

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return error::config(format!("{what} has negative or non-finite entries"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return error::config(format!("{what} sums to {sum}, not 1"));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        gamma: f64,
        r_max: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return error::config("an MDP needs at least one state and one action");
        }
        if transitions.len() != n_states * n_actions * n_states
            || rewards.len() != n_states * n_actions
            || initial.len() != n_states
        {
            return error::config("table sizes do not match (S, A)");
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return error::config("discount must lie in (0, 1)");
        }
        for row in transitions.chunks(n_states) {
            check_distribution(row, "transition row")?;
        }
        check_distribution(&initial, "initial distribution")?;
        if rewards.iter().any(|r| !r.is_finite() || r.abs() > r_max) {
            return error::config("rewards must be finite and bounded by r_max");
        }
        Ok(Self { n_states, n_actions, transitions, rewards, initial, gamma, r_max })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    /// Same MDP with a different transition tensor.
    pub fn with_transitions(&self, transitions: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            transitions,
            self.rewards.clone(),
            self.initial.clone(),
            self.gamma,
            self.r_max,
        )
    }

    /// Same MDP with a different reward table; `r_max` becomes the largest |R|.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self> {
        let r_max = rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Self::new(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            rewards,
            self.initial.clone(),
            self.gamma,
            r_max,
        )
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        if !(gamma > 0.0 && gamma < 1.0) {
            return error::config("discount must lie in (0, 1)");
        }
        m.gamma = gamma;
        Ok(m)
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        check_distribution(&initial, "initial distribution")?;
        if initial.len() != self.n_states {
            return error::config("initial distribution length mismatch");
        }
        let mut m = self.clone();
        m.initial = initial;
        Ok(m)
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn reset(&self, rng: &mut Rng) -> usize {
        sample_categorical(&self.initial, rng)
    }

    /// Samples `s' ~ T(·|s, a)` and returns it with `R(s, a)`.
    pub fn step(&self, s: usize, a: usize, rng: &mut Rng) -> Result<(usize, f64)> {
        if s >= self.n_states || a >= self.n_actions {
            return error::argument("state or action index out of range");
        }
        Ok((sample_categorical(self.transition_row(s, a), rng), self.reward(s, a)))
    }
}

/// Inverse-CDF draw from a discrete distribution.
pub(crate) fn sample_categorical(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Flat Dirichlet(1, …, 1) draw.
pub(crate) fn dirichlet_uniform(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Random MDP with Dirichlet(1) transition rows and initial distribution, and
/// rewards uniform in `[0, 1)`. `r_max` is the largest reward entry.
pub fn make_random_tabular_mdp(n_states: usize, n_actions: usize, gamma: f64, rng: &mut Rng) -> Result<TabularMdp> {
    if n_states < 2 || n_actions < 2 {
        return error::argument("random MDPs need at least 2 states and 2 actions");
    }
    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transitions.extend(dirichlet_uniform(n_states, rng));
    }
    let rewards: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let r_max = rewards.iter().cloned().fold(0.0, f64::max);
    let initial = dirichlet_uniform(n_states, rng);
    TabularMdp::new(n_states, n_actions, transitions, rewards, initial, gamma, r_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn random_rows_are_stochastic() {
        let mut rng = SeedTree::new(4).rng();
        for _ in 0..100 {
            let m = make_random_tabular_mdp(6, 3, 0.9, &mut rng).unwrap();
            for s in 0..6 {
                for a in 0..3 {
                    assert!((m.transition_row(s, a).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
            let max = m.rewards().iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(m.r_max(), max);
        }
    }

    #[test]
    fn same_seed_same_mdp() {
        let a = make_random_tabular_mdp(5, 2, 0.9, &mut SeedTree::new(8).rng()).unwrap();
        let b = make_random_tabular_mdp(5, 2, 0.9, &mut SeedTree::new(8).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_sizes_rejected() {
        let mut rng = SeedTree::new(0).rng();
        assert!(matches!(make_random_tabular_mdp(1, 2, 0.9, &mut rng), Err(crate::Error::Argument(_))));
        assert!(matches!(make_random_tabular_mdp(3, 1, 0.9, &mut rng), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn point_mass_initial_always_resets_to_zero() {
        let m = make_random_tabular_mdp(4, 2, 0.9, &mut SeedTree::new(2).rng())
            .unwrap()
            .with_initial(vec![1.0, 0.0, 0.0, 0.0])
            .unwrap();
        let mut rng = SeedTree::new(3).rng();
        assert!((0..1000).all(|_| m.reset(&mut rng) == 0));
    }

    #[test]
    fn json_round_trip() {
        let m = make_random_tabular_mdp(3, 2, 0.95, &mut SeedTree::new(1).rng()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: TabularMdp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["gamma"] = serde_json::json!(1.5);
        assert!(serde_json::from_value::<TabularMdp>(doc).is_err());
    }
}
