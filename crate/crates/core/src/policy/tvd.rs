use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::Matrix;
use crate::rng::{standard_normal, Rng};

use super::gaussian::{diag_gaussian_kl, GaussianPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return error::argument("mean and std must have the same non-zero length");
        }
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return error::argument("Gaussian parameters must be finite with positive std");
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let mut lp = 0.0;
        for ((m, s), v) in self.mean.iter().zip(&self.std).zip(x) {
            let z = (v - m) / s;
            lp += -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln();
        }
        lp
    }
}

/// Finite mixture of diagonal Gaussians with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<DiagGaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<DiagGaussian>) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return error::argument("mixture needs one weight per component");
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return error::argument("mixture components differ in dimension");
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return error::argument("mixture weights must be non-negative and sum to 1");
        }
        Ok(Self { weights, components })
    }

    pub fn single(g: DiagGaussian) -> Self {
        Self { weights: vec![1.0], components: vec![g] }
    }

    /// Equal-weight mixture.
    pub fn uniform(components: Vec<DiagGaussian>) -> Result<Self> {
        let k = components.len() as f64;
        Self::new(vec![1.0 / k; components.len()], components)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[DiagGaussian] {
        &self.components
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c.log_pdf(x))
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let c = &self.components[k];
        c.mean.iter().zip(&c.std).map(|(m, s)| m + s * standard_normal(rng)).collect()
    }
}

/// Numerical settings for total variation distance between mixtures.
/// One-dimensional inputs use composite Simpson quadrature on every
/// component's `μ ± 6σ` window; higher dimensions use Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvdEstimator {
    pub intervals_per_piece: usize,
    pub mc_samples: usize,
}

impl Default for TvdEstimator {
    fn default() -> Self {
        Self { intervals_per_piece: 2000, mc_samples: 10_000 }
    }
}

/// `½ ∫ |p − q|`.
pub fn mixture_tvd(p: &GaussianMixture, q: &GaussianMixture, est: &TvdEstimator, rng: &mut Rng) -> Result<f64> {
    if p.dim() != q.dim() {
        return error::argument("distributions differ in dimension");
    }
    if p.dim() == 1 {
        Ok(quadrature_1d(p, q, est.intervals_per_piece.max(2)))
    } else {
        if est.mc_samples == 0 {
            return error::argument("Monte Carlo TVD needs at least one sample");
        }
        Ok(monte_carlo(p, q, est.mc_samples, rng))
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m.max(2) + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates `|p − q|` piecewise between the sign changes of `p − q`, located
/// on the quadrature grid and refined by bisection, so every Simpson panel
/// sees a smooth integrand.
fn quadrature_1d(p: &GaussianMixture, q: &GaussianMixture, m: usize) -> f64 {
    let windows: Vec<(f64, f64)> = p
        .components
        .iter()
        .chain(&q.components)
        .map(|c| (c.mean[0] - 6.0 * c.std[0], c.mean[0] + 6.0 * c.std[0]))
        .collect();
    let mut cuts: Vec<f64> = windows.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let d = |x: f64| p.log_pdf(&[x]).exp() - q.log_pdf(&[x]).exp();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if b <= a || !windows.iter().any(|&(lo, hi)| lo <= mid && mid <= hi) {
            continue;
        }
        let h = (b - a) / m as f64;
        let mut breaks = vec![a];
        let mut last_sign = d(a).signum() * (d(a) != 0.0) as i32 as f64;
        let mut on_zero = false;
        for i in 1..=m {
            let x = if i == m { b } else { a + i as f64 * h };
            let cur = d(x);
            if cur == 0.0 {
                if !on_zero && i < m {
                    breaks.push(x);
                }
                on_zero = true;
                continue;
            }
            let sign = cur.signum();
            if last_sign != 0.0 && sign != last_sign && !on_zero {
                breaks.push(bisect(&d, x - h, x));
            }
            last_sign = sign;
            on_zero = false;
        }
        breaks.push(b);
        for seg in breaks.windows(2) {
            let share = ((seg[1] - seg[0]) / (b - a) * m as f64).ceil() as usize;
            total += simpson(&d, seg[0], seg[1], share.max(16)).abs();
        }
    }
    (0.5 * total).clamp(0.0, 1.0)
}

fn monte_carlo(p: &GaussianMixture, q: &GaussianMixture, n: usize, rng: &mut Rng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n {
        let x = p.sample(rng);
        let log_ratio = q.log_pdf(&x) - p.log_pdf(&x);
        acc += (1.0 - log_ratio.exp()).max(0.0);
    }
    (acc / n as f64).clamp(0.0, 1.0)
}

/// `sqrt(KL(p‖q) / 2)`, an upper bound on the total variation distance.
pub fn pinsker_bound(p: &DiagGaussian, q: &DiagGaussian) -> f64 {
    let ls = |g: &DiagGaussian| g.std.iter().map(|s| s.ln()).collect::<Vec<_>>();
    let kl = diag_gaussian_kl(&p.mean, &ls(p), &q.mean, &ls(q));
    (kl.max(0.0) / 2.0).sqrt().min(1.0)
}

/// Mean over probe states of the action-distribution TVD between two policies.
pub fn policy_tvd(
    a: &GaussianPolicy,
    b: &GaussianPolicy,
    probe_states: &Matrix,
    est: &TvdEstimator,
    rng: &mut Rng,
) -> Result<f64> {
    if probe_states.rows() == 0 {
        return error::argument("no probe states");
    }
    let ma = a.mean_batch(probe_states)?;
    let mb = b.mean_batch(probe_states)?;
    let (sa, sb) = (a.std(), b.std());
    let mut total = 0.0;
    for r in 0..probe_states.rows() {
        let p = GaussianMixture::single(DiagGaussian::new(ma.row(r).to_vec(), sa.clone())?);
        let q = GaussianMixture::single(DiagGaussian::new(mb.row(r).to_vec(), sb.clone())?);
        total += mixture_tvd(&p, &q, est, rng)?;
    }
    Ok(total / probe_states.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn g(m: f64, s: f64) -> GaussianMixture {
        GaussianMixture::single(DiagGaussian::new(vec![m], vec![s]).unwrap())
    }

    #[test]
    fn identical_is_zero_and_far_apart_is_one() {
        let mut rng = SeedTree::new(0).rng();
        let est = TvdEstimator::default();
        assert!(mixture_tvd(&g(0.3, 0.7), &g(0.3, 0.7), &est, &mut rng).unwrap() < 1e-12);
        assert!((mixture_tvd(&g(0.0, 1e-8), &g(5.0, 1.0), &est, &mut rng).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_with_itself_component() {
        let mut rng = SeedTree::new(0).rng();
        let a = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let b = DiagGaussian::new(vec![100.0], vec![1.0]).unwrap();
        let mix = GaussianMixture::new(vec![0.3, 0.7], vec![a.clone(), b]).unwrap();
        let tv = mixture_tvd(&mix, &GaussianMixture::single(a), &TvdEstimator::default(), &mut rng).unwrap();
        assert!((tv - 0.7).abs() < 1e-6);
    }

    #[test]
    fn monte_carlo_agrees_with_product_of_independent_dims() {
        let mut rng = SeedTree::new(1).rng();
        let p = GaussianMixture::single(DiagGaussian::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let q = GaussianMixture::single(DiagGaussian::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap());
        let mc = mixture_tvd(&p, &q, &TvdEstimator { mc_samples: 200_000, ..Default::default() }, &mut rng).unwrap();
        let exact = mixture_tvd(&g(0.0, 1.0), &g(1.0, 1.0), &TvdEstimator::default(), &mut rng).unwrap();
        assert!((mc - exact).abs() < 0.01, "{mc} vs {exact}");
    }
}
