use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::RunSummary;
use crate::run_all;

/// Hyperparameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    LocalSteps,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "alpha" => Ok(Self::Alpha),
            "local_steps" | "local-steps" | "E" => Ok(Self::LocalSteps),
            other => Err(HarnessError::Config(format!("cannot sweep over '{other}' (expected alpha or local_steps)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::LocalSteps => "local_steps",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            Self::Alpha => cfg.fed.alpha = value,
            Self::LocalSteps => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(HarnessError::Config(format!("local_steps must be a positive integer, got {value}")));
                }
                cfg.fed.local_steps = value as usize;
            }
        }
        cfg.validate()
    }
}

/// Seed-averaged evaluation return at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: u64,
    pub env_steps: u64,
    pub mean_return: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub curve: Vec<CurvePoint>,
    /// Mean over seeds of each run's last evaluation return.
    pub final_mean_return: Option<f64>,
    pub mean_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub entries: Vec<SweepEntry>,
    /// Sweep values ordered from best to worst final return.
    pub ranking: Vec<f64>,
}

/// Mean return per epoch index across seeds; epochs reached by only some seeds
/// average over those.
pub fn mean_curve(runs: &[RunSummary]) -> Vec<CurvePoint> {
    let longest = runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let recs: Vec<_> = runs.iter().filter_map(|r| r.records.get(i)).collect();
            CurvePoint {
                epoch: recs[0].epoch,
                env_steps: recs[0].env_steps,
                mean_return: recs.iter().map(|r| r.eval_return_mean).sum::<f64>() / recs.len() as f64,
                seeds: recs.len(),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn entry(value: f64, runs: &[RunSummary]) -> SweepEntry {
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_return).collect();
    let gammas: Vec<f64> = runs.iter().flat_map(|r| r.records.iter().filter_map(|x| x.gamma)).collect();
    SweepEntry { value, curve: mean_curve(runs), final_mean_return: mean(&finals), mean_gamma: mean(&gammas) }
}

/// Runs every seed of `base` once per value, each into
/// `<output_dir>/<param>=<value>/`, and writes `sweep_report.json` and
/// `sweep.csv` into the base output directory.
pub fn run_sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(HarnessError::Config("a sweep needs at least one value".into()));
    }
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        param.apply(&mut cfg, v)?;
        cfg.output_dir = base.output_dir.join(format!("{}={v}", param.name()));
        let runs = run_all(&cfg)?;
        entries.push(entry(v, &runs));
    }
    let mut order: Vec<&SweepEntry> = entries.iter().collect();
    order.sort_by(|a, b| {
        let key = |e: &SweepEntry| e.final_mean_return.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a))
    });
    let report = SweepReport { param, ranking: order.iter().map(|e| e.value).collect(), entries };
    write_report(&base.output_dir, &report)?;
    Ok(report)
}

fn write_report(dir: &Path, report: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep_report.json"), serde_json::to_string_pretty(report)?)?;
    let mut csv = format!("{},epoch,env_steps,mean_return,seeds\n", report.param.name());
    for e in &report.entries {
        for p in &e.curve {
            csv.push_str(&format!("{},{},{},{},{}\n", e.value, p.epoch, p.env_steps, p.mean_return, p.seeds));
        }
    }
    fs::write(dir.join("sweep.csv"), csv)?;
    Ok(())
}
