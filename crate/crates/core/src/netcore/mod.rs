//! Small feedforward network engine with manual backpropagation.
//!
//! Everything is `f64`. Randomness comes only from the seed passed to
//! [`Network::ddc`], so identical seeds give bit-identical networks.

mod adam;
mod layers;
mod matrix;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use layers::{BatchNormLayer, DenseLayer, BN_EPSILON, BN_MOMENTUM};
pub use matrix::Matrix;
pub use network::{Forward, Gradients, Layer, Mode, Network, Trace};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("layer {layer} ({kind}): expected input width {expected}, found {found}")]
    DimensionMismatch {
        layer: usize,
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite activation at layer {layer}")]
    NonFinite { layer: usize },
    #[error("batch of {rows} rows is too small for this mode")]
    BatchTooSmall { rows: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("forward trace does not match: {0}")]
    TraceMismatch(String),
    #[error("parameter gradients need a train-mode forward pass")]
    NotTrainTrace,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
