use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::metrics::read_metrics;

/// One row of the tidy learning-curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub algorithm: String,
    pub seed: u64,
    pub env_steps: u64,
    pub eval_return: f64,
}

fn parse_run_name(name: &str) -> Option<(String, u64)> {
    let (alg, seed) = name.rsplit_once("_seed")?;
    Some((alg.to_string(), seed.parse().ok()?))
}

/// Walks `runs` recursively and collects every `<alg>_seed<s>/metrics.jsonl`,
/// sorted by algorithm, seed and step.
pub fn collect_curves(runs: &Path) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    visit(runs, &mut rows)?;
    rows.sort_by(|a, b| {
        (a.algorithm.as_str(), a.seed, a.env_steps).cmp(&(b.algorithm.as_str(), b.seed, b.env_steps))
    });
    Ok(rows)
}

fn visit(dir: &Path, rows: &mut Vec<CurveRow>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if !path.is_dir() {
            continue;
        }
        let metrics = path.join("metrics.jsonl");
        let parsed = path.file_name().and_then(|n| n.to_str()).and_then(parse_run_name);
        match parsed {
            Some((algorithm, seed)) if metrics.is_file() => {
                for r in read_metrics(&metrics)? {
                    rows.push(CurveRow {
                        algorithm: algorithm.clone(),
                        seed,
                        env_steps: r.env_steps,
                        eval_return: r.eval_return_mean,
                    });
                }
            }
            _ => visit(&path, rows)?,
        }
    }
    Ok(())
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("algorithm,seed,env_steps,eval_return\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.algorithm, r.seed, r.env_steps, r.eval_return));
    }
    out
}
