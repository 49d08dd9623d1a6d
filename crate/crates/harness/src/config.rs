use std::path::{Path, PathBuf};

use femrl_core::dynamics::DynamicsConfig;
use femrl_core::envs::ContinuousEnv;
use femrl_core::federation::FedConfig;
use femrl_core::policy::{PpoConfig, TrpoConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Femrl,
    /// FEMRL with parameter averaging in place of distillation.
    FemrlFedavg,
    FedTrpo,
    FedPpo,
    Trpo,
    Ppo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Femrl, Algorithm::FemrlFedavg, Algorithm::FedTrpo, Algorithm::FedPpo, Algorithm::Trpo, Algorithm::Ppo];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Femrl => "femrl",
            Algorithm::FemrlFedavg => "femrl_fedavg",
            Algorithm::FedTrpo => "fed_trpo",
            Algorithm::FedPpo => "fed_ppo",
            Algorithm::Trpo => "trpo",
            Algorithm::Ppo => "ppo",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { hidden: vec![128, 128] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], lr: 1e-3, epochs: 5, minibatch: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub env: String,
    pub seeds: Vec<u64>,
    pub total_env_step_budget: u64,
    pub output_dir: PathBuf,
    pub eval_episodes: usize,
    pub fed: FedConfig,
    pub trpo: TrpoConfig,
    pub ppo: PpoConfig,
    pub dynamics: DynamicsConfig,
    pub policy: PolicyConfig,
    pub value: ValueConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Femrl,
            env: "pendulum".into(),
            seeds: vec![0],
            total_env_step_budget: 100_000,
            output_dir: PathBuf::from("runs"),
            eval_episodes: 10,
            fed: FedConfig::default(),
            trpo: TrpoConfig::default(),
            ppo: PpoConfig::default(),
            dynamics: DynamicsConfig::default(),
            policy: PolicyConfig::default(),
            value: ValueConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithm: Option<String>,
    pub alpha: Option<f64>,
    pub local_steps: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Runtime(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(a) = &o.algorithm {
            self.algorithm = Algorithm::parse(a)?;
        }
        if let Some(a) = o.alpha {
            self.fed.alpha = a;
        }
        if let Some(e) = o.local_steps {
            self.fed.local_steps = e;
        }
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_env_step_budget == 0 {
            return Err(HarnessError::Config("total_env_step_budget must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config("eval_episodes must be positive".into()));
        }
        if self.policy.hidden.is_empty() || self.value.hidden.is_empty() || self.dynamics.hidden.is_empty() {
            return Err(HarnessError::Config("hidden layer lists must not be empty".into()));
        }
        if self.value.epochs == 0 || self.value.minibatch == 0 || !(self.value.lr > 0.0) {
            return Err(HarnessError::Config("invalid value-function settings".into()));
        }
        ContinuousEnv::by_name(&self.env)?;
        self.fed.validate()?;
        self.trpo.validate()?;
        self.ppo.validate()?;
        self.dynamics.validate()?;
        Ok(())
    }

    pub fn make_env(&self) -> Result<ContinuousEnv> {
        Ok(ContinuousEnv::by_name(&self.env)?)
    }
}
