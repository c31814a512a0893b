//! Pipeline orchestration: collect → train → run → plot → compare.

mod compare;
mod config;
mod experiment;
mod metrics;
mod plot;
mod tune;

pub use compare::{compare, Comparison, EXPECTED_ORDER};
pub use config::{CollectSection, Config, ControllerKind, ExperimentSection, TrainSection, ENV_OUT_DIR, ENV_SEED};
pub use experiment::{
    collect_data, run_and_write, run_experiment, tick_time, timing_path, train_model, LogRow, RunLog, Summary, LOG_HEADER,
    TIMING_HEADER,
};
pub use metrics::{band, headline_percent, t_conv};
pub use plot::{emit_plot, render_svg};
pub use tune::{step_response, tune_pid1, tune_pid2, TUNE_TARGET_KMH};

use std::path::Path;

use crate::controller::ControlError;
use crate::model::ModelError;
use crate::plant::PlantError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("unknown controller {0:?} (expected pid1, pid2, random or proposed)")]
    UnknownController(String),
    #[error("proposed controller needs a trained model")]
    MissingModel,
    #[error("model file not found: {0}")]
    ModelFile(String),
    #[error("series: {0}")]
    Series(String),
    #[error("log: {0}")]
    Log(String),
    #[error("summary: {0}")]
    Summary(String),
    #[error("compare: {0}")]
    Compare(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("controller: {0}")]
    Control(#[from] ControlError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::UnknownController(_) => "unknown_controller",
            Self::MissingModel | Self::ModelFile(_) => "missing_model",
            Self::Series(_) => "series",
            Self::Log(_) => "log",
            Self::Summary(_) => "summary",
            Self::Compare(_) => "compare",
            Self::Model(_) => "model",
            Self::Plant(_) => "plant",
            Self::Control(_) => "controller",
        }
    }
}
