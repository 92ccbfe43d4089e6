//! Stacked GRU classifier with an activity head and a presence head.
//!
//! Each layer follows the standard update/reset-gate recurrence with the
//! gate input laid out as `[h_{t-1}, x_t]`:
//!
//! ```text
//! z  = sigmoid(Wz [h, x] + bz)
//! r  = sigmoid(Wr [h, x] + br)
//! h~ = tanh(Wh [r * h, x] + bh)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! Both heads read the final hidden state of the top layer.

mod backward;
pub mod io;
mod loss;
mod network;
mod train;

pub use backward::backward_bptt;
pub use loss::{decide, softmax, softmax_cross_entropy, Prediction, DEFAULT_PRESENCE_THRESHOLD};
pub use network::{
    cell_forward, ForwardOutput, ForwardTrace, GateRecord, GruConfig, GruLayerParams, GruNetwork,
    GruState, LayerTrace, Linear, NetParams,
};
pub use train::{
    batch_gradients, example_loss_and_grad, fit, train_step, Adam, Example, TrainConfig,
    TrainReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GruError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("class index {index} out of range for {classes} classes")]
    Index { index: usize, classes: usize },
    #[error("trace was recorded against parameter version {trace}, network is at {network}")]
    StaleTrace { trace: u64, network: u64 },
    #[error("training diverged at step {step}: loss {loss} ({detail})")]
    Divergence {
        step: usize,
        loss: f64,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model not found: {0}")]
    ModelNotFound(std::path::PathBuf),
    #[error("bad weight file {path}: {reason}")]
    Format {
        path: std::path::PathBuf,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GruError {
    pub fn class(&self) -> &'static str {
        match self {
            GruError::Shape(_) => "shape",
            GruError::Index { .. } => "index",
            GruError::StaleTrace { .. } => "consistency",
            GruError::Divergence { .. } => "divergence",
            GruError::Config(_) => "config",
            GruError::ModelNotFound(_) => "model-not-found",
            GruError::Format { .. } => "model-format",
            GruError::Io { .. } => "io",
        }
    }
}
