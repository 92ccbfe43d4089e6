//! Labelled synthetic captures with frequency- and envelope-coded classes.
//!
//! Every class modulates all subcarriers with one shared signature (a tone,
//! a level step, a transient or a dip) drawn afresh for each window-sized
//! segment; the empty room is the noise floor alone.

mod dataset;
mod profile;

pub use dataset::{
    build_dataset, format_labels, generate_labeled_capture, labelled_windows, read_labels,
    split_stratified, write_labels, Dataset, LabelSpan, SynthConfig, LABEL_HEADER,
};
pub use profile::{generate_capture, ActivityProfile, Envelope};

use thiserror::Error;

use crate::csi::CsiError;
use crate::dsp::DspError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis configuration: {0}")]
    Config(String),
    #[error("label file line {line}: {reason}")]
    Labels { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

impl SynthError {
    pub fn class(&self) -> &'static str {
        match self {
            SynthError::Config(_) => "config",
            SynthError::Labels { .. } => "malformed-record",
            SynthError::Io { .. } => "io",
            SynthError::Csi(e) => e.class(),
            SynthError::Dsp(e) => e.class(),
        }
    }
}
