use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use femrl_harness::{Algorithm, ExperimentConfig};

fn femrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_femrl")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let mut cfg = ExperimentConfig { algorithm: Algorithm::FedPpo, total_env_step_budget: 800, eval_episodes: 1, ..Default::default() };
    cfg.fed.clients = 2;
    cfg.fed.env_steps_per_epoch = 200;
    cfg.policy.hidden = vec![8];
    cfg.value.hidden = vec![8];
    let path = dir.join("cfg.toml");
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("runs");
    let o = femrl(&["run", "--config", &cfg, "--seed", "4", "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fed_ppo seed 4: 2 epochs"));
    assert!(out.join("fed_ppo_seed4/metrics.jsonl").is_file());
    assert!(out.join("summary.csv").is_file());

    let o = femrl(&["plot-data", "--runs", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("fed_ppo,4,400,"));
}

#[test]
fn algorithm_override_switches_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("runs");
    let o = femrl(&["run", "--config", &cfg, "--algorithm", "fed_trpo", "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("fed_trpo_seed0/metrics.jsonl").is_file());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    assert_eq!(femrl(&["run", "--config", &cfg, "--alpha", "2.0"]).status.code(), Some(1));
    assert_eq!(femrl(&["run", "--config", &cfg, "--algorithm", "dqn"]).status.code(), Some(1));
    assert_eq!(femrl(&["run", "--config", "/nonexistent/cfg.toml"]).status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "learning_rate = 3").unwrap();
    let o = femrl(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = femrl(&["sweep", "--config", &cfg, "--param", "gamma", "--values", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn theory_prints_json_report() {
    let o = femrl(&["theory", "--instances", "5", "--seed", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
