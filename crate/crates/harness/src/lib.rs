//! Experiment orchestration for federated ensemble model-based RL: config
//! parsing, the algorithm pipelines, evaluation, metrics persistence and
//! parameter sweeps.

pub mod baselines;
pub mod config;
pub mod error;
pub mod eval;
pub mod femrl;
pub mod metrics;
pub mod plot;
pub mod rollout;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{Algorithm, ExperimentConfig, Overrides};
pub use error::{HarnessError, Result};
pub use eval::{evaluate_policy, EvalResult};
pub use metrics::{MetricsRecord, RunSummary};

/// Directory a single run writes into.
pub fn run_dir(output_dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    output_dir.join(format!("{}_seed{seed}", algorithm.name()))
}

/// Runs the configured algorithm for one seed and returns its summary.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunSummary> {
    let dir = run_dir(&cfg.output_dir, cfg.algorithm, seed);
    match cfg.algorithm {
        Algorithm::Femrl | Algorithm::FemrlFedavg => femrl::run_femrl(cfg, seed, &dir),
        _ => baselines::run_baseline(cfg, seed, &dir),
    }
}

/// Runs every configured seed and writes `summary.csv` into the output directory.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        out.push(run_single(cfg, seed)?);
    }
    metrics::write_summary_csv(&cfg.output_dir.join("summary.csv"), &out)?;
    Ok(out)
}
