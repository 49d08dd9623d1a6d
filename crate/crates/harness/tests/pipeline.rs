use std::fs;
use std::path::Path;

use femrl_harness::baselines::average_policies;
use femrl_harness::metrics::read_metrics;
use femrl_harness::plot::{collect_curves, curves_csv};
use femrl_harness::sweep::{run_sweep, SweepParam};
use femrl_harness::{run_all, run_single, Algorithm, ExperimentConfig, HarnessError, Overrides};

fn tiny(algorithm: Algorithm, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { algorithm, total_env_step_budget: 1600, eval_episodes: 2, ..Default::default() };
    cfg.output_dir = out.to_path_buf();
    cfg.fed.clients = 2;
    cfg.fed.local_steps = 4;
    cfg.fed.rounds = 1;
    cfg.fed.policy_steps = 1;
    cfg.fed.n_inner = 1;
    cfg.fed.rollouts_per_generation = 2;
    cfg.fed.n_rollout = 50;
    cfg.fed.n_distill = 5;
    cfg.fed.env_steps_per_epoch = 400;
    cfg.dynamics.hidden = vec![16];
    cfg.policy.hidden = vec![8];
    cfg.value.hidden = vec![8];
    cfg.trpo.batch_size = 400;
    cfg.ppo.steps_per_epoch = 400;
    cfg
}

#[test]
fn every_algorithm_writes_metrics_for_each_epoch() {
    let dir = tempfile::tempdir().unwrap();
    for alg in Algorithm::ALL {
        let cfg = tiny(alg, dir.path());
        let summary = run_single(&cfg, 3).unwrap();
        let records = read_metrics(&summary.run_dir.join("metrics.jsonl")).unwrap();
        assert!(!records.is_empty(), "{}", alg.name());
        assert_eq!(records, summary.records);
        assert!(records.windows(2).all(|w| w[1].env_steps > w[0].env_steps));
        assert!(records.iter().all(|r| r.eval_return_mean.is_finite()));
        assert!(summary.env_steps <= cfg.total_env_step_budget);
        let timing = fs::read_to_string(summary.run_dir.join("timing.jsonl")).unwrap();
        assert_eq!(timing.lines().count(), records.len());
        let model_based = matches!(alg, Algorithm::Femrl | Algorithm::FemrlFedavg);
        assert_eq!(records[0].gamma.is_some(), model_based, "{}", alg.name());
        assert_eq!(records[0].fictitious_steps > 0, model_based, "{}", alg.name());
    }
}

#[test]
fn runs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for alg in [Algorithm::Femrl, Algorithm::FedPpo] {
        let a = run_single(&tiny(alg, &dir.path().join("a")), 5).unwrap();
        let b = run_single(&tiny(alg, &dir.path().join("b")), 5).unwrap();
        let read = |p: &Path| fs::read(p.join("metrics.jsonl")).unwrap();
        assert_eq!(read(&a.run_dir), read(&b.run_dir), "{}", alg.name());
    }
}

#[test]
fn single_client_federated_trpo_is_centralized_trpo() {
    let dir = tempfile::tempdir().unwrap();
    let mut fed = tiny(Algorithm::FedTrpo, dir.path());
    fed.fed.clients = 1;
    let central = tiny(Algorithm::Trpo, dir.path());
    let f = run_single(&fed, 2).unwrap();
    let c = run_single(&central, 2).unwrap();
    assert_eq!(f.records.len(), c.records.len());
    for (x, y) in f.records.iter().zip(&c.records) {
        assert_eq!(x.eval_return_mean, y.eval_return_mean);
        assert_eq!(x.trpo_kl, y.trpo_kl);
        assert_eq!(x.env_steps, y.env_steps);
    }
}

#[test]
fn federated_baseline_counts_round_trip_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_single(&tiny(Algorithm::FedTrpo, dir.path()), 0).unwrap();
    let bytes = s.records[0].communication_bytes;
    assert!(bytes > 0 && bytes % 4 == 0);
    assert!(s.records.iter().all(|r| r.communication_bytes == bytes));
    let c = run_single(&tiny(Algorithm::Trpo, dir.path()), 0).unwrap();
    assert!(c.records.iter().all(|r| r.communication_bytes == 0));
}

#[test]
fn run_all_writes_a_summary_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Algorithm::Ppo, dir.path());
    cfg.seeds = vec![0, 1];
    let runs = run_all(&cfg).unwrap();
    assert_eq!(runs.len(), 2);
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sweep_and_plot_data_cover_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Algorithm::Femrl, dir.path());
    cfg.total_env_step_budget = 800;
    let report = run_sweep(&cfg, SweepParam::Alpha, &[0.0, 1.0]).unwrap();
    assert_eq!(report.entries.len(), 2);
    let mut ranking = report.ranking.clone();
    ranking.sort_by(f64::total_cmp);
    assert_eq!(ranking, vec![0.0, 1.0]);
    assert!(dir.path().join("alpha=0/femrl_seed0/metrics.jsonl").is_file());
    assert!(dir.path().join("alpha=1/femrl_seed0/metrics.jsonl").is_file());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep_report.json")).unwrap()).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap().starts_with("alpha,epoch"));

    let rows = collect_curves(dir.path()).unwrap();
    let epochs: usize = report.entries.iter().map(|e| e.curve.len()).sum();
    assert_eq!(rows.len(), epochs);
    let csv = curves_csv(&rows);
    assert!(csv.starts_with("algorithm,seed,env_steps,eval_return\n"));
    assert!(csv.lines().skip(1).all(|l| l.starts_with("femrl,0,")));
}

#[test]
fn bad_settings_are_config_errors() {
    let mut cfg = ExperimentConfig::default();
    let err = cfg.apply(&Overrides { alpha: Some(1.5), ..Default::default() }).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert_eq!(err.exit_code(), 1);
    assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    assert!(ExperimentConfig::from_toml("env = \"cartpole\"").is_err());
    let text = tiny(Algorithm::Femrl, Path::new("x")).to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), tiny(Algorithm::Femrl, Path::new("x")));
    assert!(average_policies(&[]).is_err());
}

#[test]
fn shipped_desk_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.fed.clients, 5);
    assert_eq!(cfg.seeds.len(), 5);
}
