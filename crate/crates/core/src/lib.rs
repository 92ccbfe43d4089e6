//! Wi-Fi CSI human-activity recognition toolkit.
//!
//! The crate covers the whole path from raw capture frames to decided
//! activity labels:
//!
//! - [`csi`]: capture-file parsing, amplitude extraction, subcarrier selection
//! - [`dsp`]: median filter, Butterworth low-pass, EMD denoising, min-max scaling
//! - [`gru`]: a 3-layer GRU with activity and presence heads, BPTT and Adam
//! - [`quant`]: INT8 post-training quantization and FP16 round-tripping
//! - [`pipeline`]: windowing, a staged streaming runtime and benchmarks
//! - [`synth`]: a labelled synthetic capture generator
//!
//! # Feature flags
//!
//! - **`parallel`** *(default)*: data-parallel loops run on rayon. Without it
//!   every [`Exec::Parallel`] request silently runs sequentially.

pub mod classes;
pub mod csi;
pub mod dsp;
mod error;
pub mod exec;
pub mod gru;
pub mod matrix;
pub mod pipeline;
pub mod quant;
pub mod real;
pub mod synth;

pub use classes::ClassLabel;
pub use error::{Error, Result};
pub use exec::Exec;
pub use matrix::Matrix;
pub use real::Real;
