use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::tabular::sample_categorical;
use crate::envs::{make_random_tabular_mdp, TabularMdp};
use crate::error::{self, Result};
use crate::federation::sync_count;
use crate::par;
use crate::rng::{Rng, SeedTree};

use super::exact::TabularPolicy;
use super::instances::random_policy;
use super::lemmas::{check_lemma1, TheoryReport};

const EPISODE_LEN: usize = 50;

/// Each client samples `steps` transitions with its own sample policy; the
/// server pools the clients' count tables into one maximum-likelihood model.
/// Unvisited state-action pairs get a uniform next-state row.
pub fn federated_tabular_model(
    mdp: &TabularMdp,
    client_policies: &[&TabularPolicy],
    steps: usize,
    rng: &mut Rng,
) -> Result<TabularMdp> {
    if client_policies.is_empty() {
        return error::argument("no clients");
    }
    for p in client_policies {
        p.check_against(mdp)?;
    }
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let seeds: Vec<(usize, u64)> = (0..client_policies.len()).map(|k| (k, rng.random::<u64>())).collect();
    let tables = par::map(&seeds, |&(k, seed)| {
        let mut rng = SeedTree::new(seed).rng();
        let mut counts = vec![0u64; n_s * n_a * n_s];
        let mut s = mdp.reset(&mut rng);
        for t in 0..steps {
            if t % EPISODE_LEN == 0 && t > 0 {
                s = mdp.reset(&mut rng);
            }
            let a = sample_categorical(client_policies[k].row(s), &mut rng);
            let (next, _) = mdp.step(s, a, &mut rng)?;
            counts[(s * n_a + a) * n_s + next] += 1;
            s = next;
        }
        Ok(counts)
    });
    let mut total = vec![0u64; n_s * n_a * n_s];
    for table in tables {
        for (t, c) in total.iter_mut().zip(table?) {
            *t += c;
        }
    }
    let mut transitions = Vec::with_capacity(total.len());
    for row in total.chunks(n_s) {
        let sum: u64 = row.iter().sum();
        if sum == 0 {
            transitions.extend(std::iter::repeat_n(1.0 / n_s as f64, n_s));
        } else {
            transitions.extend(row.iter().map(|&c| c as f64 / sum as f64));
        }
    }
    mdp.with_transitions(transitions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveCheck {
    pub seed: u64,
    pub clients: usize,
    pub alpha: f64,
    pub report: TheoryReport,
}

/// Lemma 1 against a model learned federatedly from clients of which
/// `⌊αK⌉` hold an updated policy; `π_D` is the clients' average policy.
pub fn live_lemma1_check(
    n_states: usize,
    n_actions: usize,
    clients: usize,
    alpha: f64,
    steps: usize,
    seed: u64,
) -> Result<LiveCheck> {
    let mut rng = SeedTree::new(seed).child("live").rng();
    let mdp = make_random_tabular_mdp(n_states, n_actions, 0.9, &mut rng)?;
    let old = random_policy(n_states, n_actions, &mut rng);
    let new = random_policy(n_states, n_actions, &mut rng).mix(&old, 0.3)?;
    let n_new = sync_count(alpha, clients);
    let population: Vec<&TabularPolicy> = (0..clients).map(|k| if k < n_new { &new } else { &old }).collect();
    let model = federated_tabular_model(&mdp, &population, steps, &mut rng)?;
    let pi_d = TabularPolicy::average(&population)?;
    let report = check_lemma1(&mdp, &model, &new, &pi_d)?;
    Ok(LiveCheck { seed, clients, alpha, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learned_model_rows_are_distributions_and_bound_holds() {
        let live = live_lemma1_check(6, 2, 5, 0.4, 2000, 11).unwrap();
        assert!(live.report.bound_holds);
        assert!(live.report.eps_m > 0.0);
    }
}
