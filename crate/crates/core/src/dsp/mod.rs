//! Amplitude denoising chain: median filter, Butterworth low-pass,
//! EMD high-frequency removal and min-max normalization.

mod butterworth;
mod emd;
mod median;
mod normalize;
mod preprocess;
mod spline;

pub use butterworth::{
    analog_prototype_gain_sq, apply_direct_form, apply_iir, design_butterworth, frequency_response,
    Biquad, IirFilter,
};
pub use emd::{
    count_extrema, count_zero_crossings, emd_decompose, emd_remove_high_freq, is_imf,
    EmdDecomposition, SiftConfig,
};
pub use median::{median_filter, MedianConfig};
pub use normalize::{minmax_normalize, NormStats};
pub use preprocess::{DspConfig, Preprocessor};
pub use spline::CubicSpline;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("empty input series")]
    EmptyInput,
    #[error("median radius must be at least 1")]
    MedianRadius,
    #[error("invalid filter design: {0}")]
    Design(String),
    #[error("non-finite input sample at index {0}")]
    NonFinite(usize),
    #[error("frequency {omega} rad/sample outside [0, pi)")]
    Domain { omega: f64 },
    #[error("IMF start index {k} outside 1..={max}")]
    ImfIndex { k: usize, max: usize },
    #[error("series of length {len} is shorter than the required {min}")]
    TooShort { len: usize, min: usize },
    #[error(transparent)]
    Csi(#[from] crate::csi::CsiError),
}

impl DspError {
    pub fn class(&self) -> &'static str {
        match self {
            DspError::EmptyInput | DspError::TooShort { .. } => "empty-input",
            DspError::MedianRadius | DspError::Design(_) => "config",
            DspError::NonFinite(_) => "numeric-input",
            DspError::Domain { .. } => "domain",
            DspError::ImfIndex { .. } => "index",
            DspError::Csi(e) => e.class(),
        }
    }
}
