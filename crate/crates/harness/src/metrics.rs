use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of `metrics.jsonl`, written after every training epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: u64,
    pub env_steps: u64,
    pub fictitious_steps: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub dynamics_loss: Option<f64>,
    pub distill_loss: Option<f64>,
    pub gamma: Option<f64>,
    pub communication_bytes: u64,
    pub trpo_kl: Option<f64>,
    pub trpo_accepted: u64,
    pub trpo_rejected: u64,
    pub model_divergences: u64,
}

/// Final line written when a run aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub failure: String,
    pub epoch: u64,
}

/// Append-only JSONL sink; every line is flushed so a crashed run leaves a
/// parseable file.
pub struct JsonlWriter {
    file: File,
}

impl JsonlWriter {
    /// Creates (truncating) `path` and its parent directories.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut line = serde_json::to_string(value)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads every metrics record in a file, skipping failure lines.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(rec) = serde_json::from_str::<MetricsRecord>(&line) {
            out.push(rec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub run_dir: PathBuf,
    pub epochs: u64,
    pub env_steps: u64,
    pub final_return: Option<f64>,
    pub best_return: Option<f64>,
    pub records: Vec<MetricsRecord>,
}

impl RunSummary {
    pub fn new(algorithm: &str, seed: u64, run_dir: &Path, records: Vec<MetricsRecord>) -> Self {
        let last = records.last();
        Self {
            algorithm: algorithm.to_string(),
            seed,
            run_dir: run_dir.to_path_buf(),
            epochs: records.len() as u64,
            env_steps: last.map_or(0, |r| r.env_steps),
            final_return: last.map(|r| r.eval_return_mean),
            best_return: records.iter().map(|r| r.eval_return_mean).reduce(f64::max),
            records,
        }
    }

    /// Real environment steps consumed when evaluation return first reached `target`.
    pub fn steps_to_reach(&self, target: f64) -> Option<u64> {
        self.records.iter().find(|r| r.eval_return_mean >= target).map(|r| r.env_steps)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_summary_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = String::from("algorithm,seed,epochs,env_steps,final_return,best_return\n");
    for r in runs {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm,
            r.seed,
            r.epochs,
            r.env_steps,
            opt(r.final_return),
            opt(r.best_return)
        ));
    }
    fs::write(path, text)?;
    Ok(())
}
