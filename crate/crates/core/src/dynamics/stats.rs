use serde::{Deserialize, Serialize};

use crate::error::{self, Result};

/// Lower bound applied to every standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Streaming mean and standard deviation of state deltas `s' - s`.
///
/// Uses the pairwise (Chan et al.) update so that any split of the history
/// into batches yields the same statistics up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    m2: Vec<f64>,
    count: u64,
}

impl NormStats {
    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], m2: vec![0.0; dim], count: 0 }
    }

    /// Statistics with a fixed mean and standard deviation, standing for `count` samples.
    pub fn from_moments(mean: Vec<f64>, std: Vec<f64>, count: u64) -> Result<Self> {
        if mean.len() != std.len() {
            return error::config("mean and std lengths differ");
        }
        let m2 = std.iter().map(|s| s * s * count as f64).collect();
        Ok(Self { mean, m2, count })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population standard deviation, floored at [`SIGMA_FLOOR`]. Empty
    /// statistics report 1 so that normalization is the identity.
    pub fn std(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|m| (m / self.count as f64).sqrt().max(SIGMA_FLOOR)).collect()
    }

    /// Folds a batch of deltas into the running statistics.
    pub fn update(&mut self, deltas: &[Vec<f64>]) -> Result<()> {
        if deltas.is_empty() {
            return error::argument("statistics update needs at least one sample");
        }
        let d = self.dim();
        if deltas.iter().any(|x| x.len() != d) {
            return error::config("delta length does not match statistics");
        }
        let n = deltas.len() as f64;
        let mut batch_mean = vec![0.0; d];
        for x in deltas {
            for (m, v) in batch_mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        batch_mean.iter_mut().for_each(|m| *m /= n);
        let mut batch_m2 = vec![0.0; d];
        for x in deltas {
            for i in 0..d {
                let r = x[i] - batch_mean[i];
                batch_m2[i] += r * r;
            }
        }
        let batch = NormStats { mean: batch_mean, m2: batch_m2, count: deltas.len() as u64 };
        *self = self.merge(&batch)?;
        Ok(())
    }

    /// Statistics of the union of two sample sets.
    pub fn merge(&self, other: &NormStats) -> Result<NormStats> {
        if self.dim() != other.dim() {
            return error::config("cannot merge statistics of different dimension");
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut mean = Vec::with_capacity(self.dim());
        let mut m2 = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            mean.push(self.mean[i] + delta * nb / n);
            m2.push(self.m2[i] + other.m2[i] + delta * delta * na * nb / n);
        }
        Ok(NormStats { mean, m2, count: self.count + other.count })
    }

    /// Count-weighted pooling: weighted mean plus pooled variance.
    pub fn pooled(all: &[NormStats]) -> Result<NormStats> {
        let first = all.first().ok_or_else(|| crate::Error::Config("no statistics to pool".into()))?;
        let mut acc = NormStats::new(first.dim());
        for s in all {
            acc = acc.merge(s)?;
        }
        Ok(acc)
    }

    pub fn normalize(&self, delta: &[f64]) -> Vec<f64> {
        let std = self.std();
        delta.iter().zip(&self.mean).zip(&std).map(|((d, m), s)| (d - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        let std = self.std();
        z.iter().zip(&self.mean).zip(&std).map(|((z, m), s)| z * s + m).collect()
    }
}

/// Folds the deltas of `(s, s')` pairs into `stats`.
pub fn update_norm_stats(stats: &mut NormStats, pairs: &[(&[f64], &[f64])]) -> Result<()> {
    let deltas: Vec<Vec<f64>> =
        pairs.iter().map(|(s, next)| next.iter().zip(s.iter()).map(|(b, a)| b - a).collect()).collect();
    stats.update(&deltas)
}
