use std::path::Path;

use super::network::QuantGruNetwork;
use super::QuantError;
use crate::gru::io::{read_container, ModelKind};
use crate::gru::{io, GruConfig, GruNetwork};
use crate::matrix::Matrix;

/// Anything that maps a window to `(activity logits, presence logits)`.
pub trait Classifier: Send + Sync {
    fn config(&self) -> &GruConfig;
    fn logits(&self, window: &Matrix<f32>) -> Result<(Vec<f32>, Vec<f32>), QuantError>;
    /// Stored bytes of the weight matrices (biases excluded).
    fn weight_payload_bytes(&self) -> usize;
}

impl Classifier for GruNetwork<f32> {
    fn config(&self) -> &GruConfig {
        GruNetwork::config(self)
    }

    fn logits(&self, window: &Matrix<f32>) -> Result<(Vec<f32>, Vec<f32>), QuantError> {
        Ok(GruNetwork::logits(self, window)?)
    }

    fn weight_payload_bytes(&self) -> usize {
        let layers = self.config().num_layers;
        self.params()
            .tensors()
            .iter()
            .enumerate()
            .filter(|(i, _)| crate::gru::NetParams::<f32>::is_weight(*i, layers))
            .map(|(_, t)| 4 * t.1.len())
            .sum()
    }
}

impl Classifier for QuantGruNetwork {
    fn config(&self) -> &GruConfig {
        QuantGruNetwork::config(self)
    }

    fn logits(&self, window: &Matrix<f32>) -> Result<(Vec<f32>, Vec<f32>), QuantError> {
        self.quant_forward(window)
    }

    fn weight_payload_bytes(&self) -> usize {
        QuantGruNetwork::weight_payload_bytes(self)
    }
}

/// A model file of either precision.
#[derive(Debug, Clone)]
pub enum Model {
    Fp32(GruNetwork<f32>),
    Int8(QuantGruNetwork),
}

impl Model {
    /// Loads a container, dispatching on its header.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuantError> {
        let c = read_container(path)?;
        Ok(match c.kind {
            ModelKind::Fp32 => Model::Fp32(io::container_to_network(&c)?),
            ModelKind::Int8 => Model::Int8(QuantGruNetwork::from_container(&c)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Fp32(_) => ModelKind::Fp32,
            Model::Int8(_) => ModelKind::Int8,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Fp32(n) => n,
            Model::Int8(q) => q,
        }
    }
}

impl Classifier for Model {
    fn config(&self) -> &GruConfig {
        self.inner().config()
    }

    fn logits(&self, window: &Matrix<f32>) -> Result<(Vec<f32>, Vec<f32>), QuantError> {
        self.inner().logits(window)
    }

    fn weight_payload_bytes(&self) -> usize {
        self.inner().weight_payload_bytes()
    }
}
