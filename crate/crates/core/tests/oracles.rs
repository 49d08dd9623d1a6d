//! Statistical and closed-form oracles for the exact and estimated quantities.

use femrl_core::envs::{make_random_tabular_mdp, Pendulum, TabularMdp};
use femrl_core::federation::{estimate_gamma, gamma_formula, sync_policies, ClientState};
use femrl_core::dynamics::DynamicsModel;
use femrl_core::nn::Matrix;
use femrl_core::policy::{mixture_tvd, policy_tvd, DiagGaussian, GaussianMixture, GaussianPolicy, TvdEstimator};
use femrl_core::rng::{Rng, SeedTree};
use femrl_core::theory::{discounted_visitation, exact_value, random_policy, TabularPolicy};
use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn categorical(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// One rollout that continues with probability γ after each step; its
/// undiscounted return is an unbiased estimate of the discounted value.
fn geometric_return(mdp: &TabularMdp, pi: &TabularPolicy, rng: &mut Rng) -> f64 {
    let mut s = categorical(mdp.initial(), rng);
    let mut total = 0.0;
    loop {
        let a = categorical(pi.row(s), rng);
        total += mdp.reward(s, a);
        if rng.random::<f64>() >= mdp.gamma() {
            return total;
        }
        s = categorical(mdp.transition_row(s, a), rng);
    }
}

#[test]
fn exact_value_matches_monte_carlo() {
    let mut rng = SeedTree::new(21).rng();
    let mdp = make_random_tabular_mdp(5, 3, 0.9, &mut rng).unwrap();
    let pi = random_policy(5, 3, &mut rng);
    let n = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let g = geometric_return(&mdp, &pi, &mut rng);
        sum += g;
        sq += g * g;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    let exact = exact_value(&mdp, &pi).unwrap();
    assert!((mean - exact).abs() < 4.0 * se, "MC {mean} ± {se}, exact {exact}");
}

#[test]
fn exact_value_matches_value_iteration() {
    let mut rng = SeedTree::new(22).rng();
    for _ in 0..20 {
        let mdp = make_random_tabular_mdp(6, 3, 0.95, &mut rng).unwrap();
        let pi = random_policy(6, 3, &mut rng);
        let mut v = vec![0.0; 6];
        for _ in 0..2000 {
            v = (0..6)
                .map(|s| {
                    (0..3)
                        .map(|a| {
                            let next: f64 = mdp.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                            pi.prob(s, a) * (mdp.reward(s, a) + mdp.gamma() * next)
                        })
                        .sum()
                })
                .collect();
        }
        let iterated: f64 = mdp.initial().iter().zip(&v).map(|(p, x)| p * x).sum();
        assert!((exact_value(&mdp, &pi).unwrap() - iterated).abs() < 1e-9);
    }
}

#[test]
fn visitation_passes_chi_square() {
    let mut rng = SeedTree::new(23).rng();
    let mdp = make_random_tabular_mdp(6, 2, 0.8, &mut rng).unwrap();
    let pi = random_policy(6, 2, &mut rng);
    let rho = discounted_visitation(&mdp, &pi).unwrap();
    let norm: f64 = rho.iter().sum();
    assert!((norm - 1.0 / (1.0 - mdp.gamma())).abs() < 1e-9);
    let n = 200_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        // The state at a Geometric(1 − γ) stopping time is distributed as the normalized visitation.
        let mut s = categorical(mdp.initial(), &mut rng);
        while rng.random::<f64>() < mdp.gamma() {
            let a = categorical(pi.row(s), &mut rng);
            s = categorical(mdp.transition_row(s, a), &mut rng);
        }
        counts[s] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&rho)
        .map(|(&c, r)| {
            let e = n as f64 * r / norm;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(5.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} exceeds {critical}");
}

#[test]
fn policy_samples_have_the_stated_moments() {
    let mut rng = SeedTree::new(24).rng();
    let mut policy = GaussianPolicy::new(3, 2, &[8], &mut rng).unwrap();
    policy.set_log_std(&[-0.5, 0.3]).unwrap();
    let s = [0.2, -0.4, 0.9];
    let mean = policy.mean(&s).unwrap();
    let std = policy.std();
    let n = 100_000;
    let mut sums = [0.0; 2];
    let mut sqs = [0.0; 2];
    for _ in 0..n {
        let (a, _) = policy.sample_action(&s, &mut rng).unwrap();
        for d in 0..2 {
            sums[d] += a[d];
            sqs[d] += a[d] * a[d];
        }
    }
    for d in 0..2 {
        let m = sums[d] / n as f64;
        let sd = (sqs[d] / n as f64 - m * m).sqrt();
        assert!((m - mean[d]).abs() < 4.0 * std[d] / (n as f64).sqrt(), "dim {d} mean {m} vs {}", mean[d]);
        assert!((sd - std[d]).abs() < 4.0 * std[d] / (2.0 * n as f64).sqrt(), "dim {d} std {sd} vs {}", std[d]);
    }
}

/// Closed-form TVD between two univariate normals via their density crossings.
fn normal_tvd(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let (p, q) = (Normal::new(m1, s1).unwrap(), Normal::new(m2, s2).unwrap());
    let mut cuts = if (s1 - s2).abs() < 1e-15 {
        vec![0.5 * (m1 + m2)]
    } else {
        let a = 0.5 / (s2 * s2) - 0.5 / (s1 * s1);
        let b = m1 / (s1 * s1) - m2 / (s2 * s2);
        let c = m2 * m2 / (2.0 * s2 * s2) - m1 * m1 / (2.0 * s1 * s1) + (s2 / s1).ln();
        let disc = (b * b - 4.0 * a * c).sqrt();
        vec![(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)]
    };
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(cuts);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .map(|w| {
            let mass = |d: &Normal| d.cdf(w[1]) - d.cdf(w[0]);
            (mass(&p) - mass(&q)).max(0.0)
        })
        .sum()
}

#[test]
fn univariate_tvd_matches_closed_form() {
    let mut rng = SeedTree::new(25).rng();
    let est = TvdEstimator::default();
    for _ in 0..200 {
        let (m1, m2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let s1: f64 = rng.random_range(0.1..2.0);
        let s2 = if rng.random_bool(0.3) { s1 } else { rng.random_range(0.1..2.0) };
        let p = GaussianMixture::single(DiagGaussian::new(vec![m1], vec![s1]).unwrap());
        let q = GaussianMixture::single(DiagGaussian::new(vec![m2], vec![s2]).unwrap());
        let got = mixture_tvd(&p, &q, &est, &mut rng).unwrap();
        let want = normal_tvd(m1, s1, m2, s2);
        assert!((got - want).abs() < 1e-8, "N({m1},{s1}) vs N({m2},{s2}): {got} vs {want}");
    }
}

fn perturbed(policy: &GaussianPolicy, scale: f64, rng: &mut Rng) -> GaussianPolicy {
    let mut p = policy.clone();
    let flat: Vec<f64> = p.flat_params().iter().map(|x| x + scale * rng.random_range(-1.0..1.0)).collect();
    p.set_flat_params(&flat).unwrap();
    p
}

#[test]
fn two_policy_gamma_is_twice_the_stated_law() {
    let tree = SeedTree::new(26);
    let mut rng = tree.rng();
    let old = GaussianPolicy::new(3, 1, &[16], &mut rng).unwrap();
    let new = perturbed(&old, 0.3, &mut rng);
    let pend = Pendulum::default();
    let probes = Matrix::from_rows(
        &(0..16).map(|_| femrl_core::envs::Environment::reset(&pend, &mut rng)).collect::<Vec<_>>(),
    )
    .unwrap();
    let est = TvdEstimator::default();
    let d = policy_tvd(&old, &new, &probes, &est, &mut rng).unwrap();
    assert!(d > 0.01);
    let k = 10;
    for updated in 0..=k {
        let alpha = updated as f64 / k as f64;
        let policies: Vec<&GaussianPolicy> = (0..k).map(|i| if i < updated { &new } else { &old }).collect();
        let g = estimate_gamma(&policies, &probes, &est, &mut rng).unwrap().gamma;
        let law = gamma_formula(alpha, k, d);
        assert!((g - 2.0 * law).abs() < 1e-7, "alpha {alpha}: Γ {g}, law {law}");
    }
}

#[test]
fn sync_chooses_clients_uniformly() {
    let tree = SeedTree::new(27);
    let policy = GaussianPolicy::new(2, 1, &[4], &mut tree.child("p").rng()).unwrap();
    let model = DynamicsModel::new(2, 1, &[4], &mut tree.child("m").rng()).unwrap();
    let k = 10;
    let mut clients: Vec<ClientState> =
        (0..k).map(|i| ClientState::new(i, 10, policy.clone(), model.clone(), tree.index(i as u64).rng())).collect();
    let mut rng = tree.child("sync").rng();
    let trials = 20_000;
    let mut counts = vec![0usize; k];
    for v in 0..trials {
        let chosen = sync_policies(&policy, v as u64, &mut clients, 0.3, &mut rng).unwrap();
        assert_eq!(chosen.len(), 3);
        for i in chosen {
            counts[i] += 1;
        }
    }
    let expected = trials as f64 * 0.3;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((k - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} exceeds {critical}: {counts:?}");
}
