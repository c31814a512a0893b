//! Forward-model data pipeline: trajectory logs, supervised windows, normalization,
//! training, prediction, and the `.ddcn` model file.

mod io;
mod normalizer;
mod train;
mod trajectory;
mod window;

pub use io::{load, save, FORMAT_VERSION};
pub use normalizer::{ModelNormalizer, Normalizer};
pub use train::{split_indices, train, DEFAULT_HIDDEN, BatchPrediction, TrainConfig, TrainReport, TrainedModel, TrainingMeta};
pub use trajectory::{Trajectory, TrajectoryRow, TRAJECTORY_HEADER};
pub use window::{window_trajectory, TrainingSample};

use serde::Deserialize;

use crate::netcore::NetError;

/// Problem dimensions and bounds shared by the model and the controller.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Steps predicted and optimized (`N`).
    pub horizon: usize,
    /// Task-state width per step (`N_s`).
    pub state_dim: usize,
    /// Initial-state width (`N_i`).
    pub init_dim: usize,
    /// Control-input width per step (`N_u`).
    pub input_dim: usize,
    /// Control period in seconds.
    pub period: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            state_dim: 1,
            init_dim: 4,
            input_dim: 1,
            period: 0.2,
            u_min: 0.0,
            u_max: 50.0,
        }
    }
}

impl ModelConfig {
    pub fn net_in_dim(&self) -> usize {
        self.init_dim + self.horizon * self.input_dim
    }

    pub fn net_out_dim(&self) -> usize {
        self.horizon * self.state_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.horizon > 0
            && self.state_dim > 0
            && self.init_dim > 0
            && self.input_dim > 0
            && self.period > 0.0
            && self.period.is_finite()
            && self.u_min < self.u_max;
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(format!("{self:?}")))
        }
    }
}

/// The four-element initial state fed to the network ahead of the input sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitState {
    /// km/h
    pub velocity: f64,
    /// km/h per s, backward difference over one period
    pub acceleration: f64,
    /// deg
    pub pedal_angle: f64,
    /// deg/s, backward difference over one period
    pub pedal_rate: f64,
}

impl InitState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.velocity, self.acceleration, self.pedal_angle, self.pedal_rate]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("trajectory shorter than horizon: {rows} rows, horizon {horizon}")]
    TooShort { rows: usize, horizon: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("unsupported model file version: {0}")]
    Version(String),
    #[error("model file truncated at line {line}")]
    Truncated { line: usize },
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model file line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error("model file inconsistent: {0}")]
    Consistency(String),
}
