use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use femrl_core::theory::run_theory_suite;
use femrl_harness::plot::{collect_curves, curves_csv};
use femrl_harness::sweep::{run_sweep, SweepParam};
use femrl_harness::{run_all, ExperimentConfig, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "femrl", version, about = "Federated ensemble model-based reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm for every configured seed.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        local_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Repeat a run over several values of one hyperparameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// alpha or local_steps
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check the improvement lemmas on random tabular MDPs.
    Theory {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a tidy learning-curve CSV for every run below a directory.
    PlotData {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn load(config: Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    match config {
        Some(p) => ExperimentConfig::load(&p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, algorithm, alpha, local_steps, seed, output_dir } => {
            let mut cfg = load(config)?;
            cfg.apply(&Overrides { algorithm, alpha, local_steps, seed, output_dir })?;
            for s in run_all(&cfg)? {
                println!(
                    "{} seed {}: {} epochs, {} env steps, final return {}",
                    s.algorithm,
                    s.seed,
                    s.epochs,
                    s.env_steps,
                    s.final_return.map_or("n/a".into(), |r| format!("{r:.2}"))
                );
            }
        }
        Command::Sweep { config, param, values, output_dir } => {
            let mut cfg = load(config)?;
            cfg.apply(&Overrides { output_dir, ..Default::default() })?;
            let report = run_sweep(&cfg, SweepParam::parse(&param)?, &values)?;
            for e in &report.entries {
                println!(
                    "{}={}: final mean return {}",
                    report.param.name(),
                    e.value,
                    e.final_mean_return.map_or("n/a".into(), |r| format!("{r:.2}"))
                );
            }
            println!("ranking: {:?}", report.ranking);
        }
        Command::Theory { instances, seed } => {
            let report = run_theory_suite(instances, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::PlotData { runs } => {
            print!("{}", curves_csv(&collect_curves(&runs)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
