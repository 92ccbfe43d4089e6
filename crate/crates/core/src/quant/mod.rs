//! Post-training INT8 quantization, FP16 rounding, and accuracy and
//! agreement reports over any [`Classifier`].
//!
//! Weights use symmetric per-tensor scales (`max|w| / 127`, ties rounded away
//! from zero). Activations entering each matrix product use asymmetric
//! per-tensor ranges observed on a calibration set. Products accumulate in
//! `i32`; biases and nonlinearities stay in `f32`.

mod accuracy;
mod fp16;
mod model;
mod network;
mod report;
mod tensor;

pub use accuracy::{accuracy_report, AccuracyReport, AccuracyRow};
pub use fp16::fp16_roundtrip;
pub use model::{Classifier, Model};
pub use network::{
    quantize_network, Calibration, CalibrationSet, LayerRanges, QuantGate, QuantGruNetwork,
    QuantHead, QuantLayer,
};
pub use report::{agreement_report, AgreementReport, AgreementRow};
pub use tensor::{quantize_tensor, ActQuant, QuantTensor};

use thiserror::Error;

use crate::gru::GruError;

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("network has not been calibrated")]
    Uncalibrated,
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("values overflow half precision in: {}", tensors.join(", "))]
    Range { tensors: Vec<String> },
    #[error(transparent)]
    Gru(#[from] GruError),
}

impl QuantError {
    pub fn class(&self) -> &'static str {
        match self {
            QuantError::NonFinite { .. } => "numeric",
            QuantError::Uncalibrated => "state",
            QuantError::EmptyCalibration => "config",
            QuantError::Shape(_) => "shape",
            QuantError::Range { .. } => "range",
            QuantError::Gru(e) => e.class(),
        }
    }
}
