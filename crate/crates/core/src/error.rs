use thiserror::Error;

use crate::csi::CsiError;
use crate::dsp::DspError;
use crate::gru::GruError;
use crate::pipeline::PipelineError;
use crate::quant::QuantError;
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping every module's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Gru(#[from] GruError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl Error {
    /// Short, stable, greppable error class (`malformed-record`, `shape`, ...).
    pub fn class(&self) -> &'static str {
        match self {
            Error::Csi(e) => e.class(),
            Error::Dsp(e) => e.class(),
            Error::Gru(e) => e.class(),
            Error::Quant(e) => e.class(),
            Error::Pipeline(e) => e.class(),
            Error::Synth(e) => e.class(),
        }
    }
}
