use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::HarnessError;
use crate::baselines::{Pid1Gains, Pid2Gains, RandomParams};
use crate::controller::ControllerConfig;
use crate::model::{ModelConfig, TrainConfig, DEFAULT_HIDDEN};
use crate::netcore::AdamConfig;
use crate::plant::PlantParams;

/// Overrides `[experiment] seed`.
pub const ENV_SEED: &str = "DDCNET_SEED";
/// Overrides `[experiment] out_dir`.
pub const ENV_OUT_DIR: &str = "DDCNET_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Pid1,
    Pid2,
    Random,
    Proposed,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pid1 => "pid1",
            Self::Pid2 => "pid2",
            Self::Random => "random",
            Self::Proposed => "proposed",
        }
    }
}

impl FromStr for ControllerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pid1" => Ok(Self::Pid1),
            "pid2" => Ok(Self::Pid2),
            "random" => Ok(Self::Random),
            "proposed" => Ok(Self::Proposed),
            other => Err(HarnessError::UnknownController(other.to_string())),
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub controller: ControllerKind,
    pub target_kmh: f64,
    pub duration_s: f64,
    /// Master seed; each pipeline stage derives its own stream from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Explicit file locations. Unset paths are derived from `out_dir`.
    pub trajectory_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub plot_path: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            controller: ControllerKind::Proposed,
            target_kmh: 5.0,
            duration_s: 60.0,
            seed: 1,
            out_dir: PathBuf::from("out"),
            trajectory_path: None,
            model_path: None,
            log_path: None,
            plot_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub duration_s: f64,
    /// Velocities the random walk hovers around, km/h, visited in equal consecutive segments.
    pub targets_kmh: Vec<f64>,
}

impl CollectSection {
    /// Target in effect at step `k` of `steps`.
    pub fn target_at(&self, k: usize, steps: usize) -> f64 {
        let n = self.targets_kmh.len();
        self.targets_kmh[(k * n / steps.max(1)).min(n - 1)]
    }
}

impl Default for CollectSection {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            targets_kmh: vec![5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self {
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            test_fraction: tc.test_fraction,
            learning_rate: tc.adam.learning_rate,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            test_fraction: self.test_fraction,
            seed,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            hidden: self.hidden.clone(),
        }
    }
}

/// Everything a pipeline run needs, one TOML table per section.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub collect: CollectSection,
    pub train: TrainSection,
    pub model: ModelConfig,
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub pid1: Pid1Gains,
    pub pid2: Pid2Gains,
    pub random: RandomParams,
}

/// Stage offsets added to the master seed.
const SEED_COLLECT: u64 = 0;
const SEED_TRAIN: u64 = 1;
const SEED_PLANT: u64 = 2;
const SEED_CONTROLLER: u64 = 3;

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `DDCNET_SEED` and `DDCNET_OUT_DIR` when set.
    pub fn apply_env(&mut self) -> Result<(), HarnessError> {
        if let Ok(s) = std::env::var(ENV_SEED) {
            self.experiment.seed = s
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{ENV_SEED}={s:?} is not an unsigned integer")))?;
        }
        if let Ok(d) = std::env::var(ENV_OUT_DIR) {
            self.experiment.out_dir = PathBuf::from(d);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.experiment;
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::Config(format!("{what} = {v} must be positive")))
            }
        };
        positive("experiment.duration_s", e.duration_s)?;
        positive("collect.duration_s", self.collect.duration_s)?;
        if self.collect.targets_kmh.is_empty() {
            return Err(HarnessError::Config("collect.targets_kmh must not be empty".into()));
        }
        if !e.target_kmh.is_finite() || self.collect.targets_kmh.iter().any(|t| !t.is_finite()) {
            return Err(HarnessError::Config("target velocities must be finite".into()));
        }
        if !(self.train.test_fraction > 0.0 && self.train.test_fraction < 1.0) {
            return Err(HarnessError::Config("train.test_fraction must lie in (0, 1)".into()));
        }
        if self.train.batch_size < 2 {
            return Err(HarnessError::Config("train.batch_size must be at least 2".into()));
        }
        positive("train.learning_rate", self.train.learning_rate)?;
        self.model.validate().map_err(|err| HarnessError::Config(err.to_string()))?;
        self.plant.validate().map_err(|err| HarnessError::Config(err.to_string()))?;
        self.controller.validate().map_err(|err| HarnessError::Config(err.to_string()))?;
        if self.controller.u_max > self.plant.theta_max || self.controller.u_min < 0.0 {
            return Err(HarnessError::Config("controller bounds exceed the pedal travel".into()));
        }
        if self.pid2.t_delay <= 0.0 {
            return Err(HarnessError::Config("pid2.t_delay must be positive".into()));
        }
        if self.random.increment_min >= self.random.increment_max {
            return Err(HarnessError::Config("random.increment_min must be below increment_max".into()));
        }
        Ok(())
    }

    /// Steps in a run of `duration_s` at the control period.
    pub fn steps(&self, duration_s: f64) -> usize {
        (duration_s / self.model.period).round() as usize
    }

    pub fn seed_collect(&self) -> u64 {
        self.experiment.seed.wrapping_add(SEED_COLLECT)
    }

    pub fn seed_train(&self) -> u64 {
        self.experiment.seed.wrapping_add(SEED_TRAIN)
    }

    pub fn seed_plant(&self) -> u64 {
        self.experiment.seed.wrapping_add(SEED_PLANT)
    }

    pub fn seed_controller(&self) -> u64 {
        self.experiment.seed.wrapping_add(SEED_CONTROLLER)
    }

    pub fn trajectory_path(&self) -> PathBuf {
        self.experiment.trajectory_path.clone().unwrap_or_else(|| self.experiment.out_dir.join("trajectory.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.experiment.model_path.clone().unwrap_or_else(|| self.experiment.out_dir.join("model.ddcn"))
    }

    fn run_stem(&self) -> String {
        format!("run_{}_{}kmh", self.experiment.controller, self.experiment.target_kmh)
    }

    pub fn log_path(&self) -> PathBuf {
        self.experiment
            .log_path
            .clone()
            .unwrap_or_else(|| self.experiment.out_dir.join(format!("{}.csv", self.run_stem())))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.log_path().with_extension("json")
    }

    pub fn plot_path(&self) -> PathBuf {
        self.experiment.plot_path.clone().unwrap_or_else(|| self.log_path().with_extension("svg"))
    }
}
