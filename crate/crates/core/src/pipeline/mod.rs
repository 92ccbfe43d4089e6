//! Streaming runtime: windowing, a three-stage ingest -> dsp -> inference
//! pipeline over bounded lock-free queues, and throughput benchmarks.

mod bench;
mod queue;
mod stream;
mod window;

pub use bench::{benchmark, thread_cpu_time, BenchReport, LatencyStats, MIN_BENCH_DURATION};
pub use queue::{BoundedQueue, DropPolicy};
pub use stream::{
    check_model, featurize, format_results, run_stream, InferenceResult, PipelineConfig,
    StreamMode, StreamOutput, RESULT_HEADER,
};
pub use window::{
    format_windows, parse_windows, read_windows, window_count, write_windows, RawWindow, Window,
    Windower, WINDOW_HEADER,
};

use thiserror::Error;

use crate::dsp::DspError;
use crate::quant::QuantError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("frame {frame} is out of order: {got_us} us after {previous_us} us")]
    Ordering {
        frame: usize,
        previous_us: u64,
        got_us: u64,
    },
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("window file line {line}: {reason}")]
    Record { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Model(#[from] QuantError),
}

impl PipelineError {
    pub fn class(&self) -> &'static str {
        match self {
            PipelineError::Ordering { .. } => "ordering",
            PipelineError::Config(_) => "config",
            PipelineError::Record { .. } => "malformed-record",
            PipelineError::Io { .. } => "io",
            PipelineError::Measurement(_) => "measurement",
            PipelineError::Dsp(e) => e.class(),
            PipelineError::Model(e) => e.class(),
        }
    }
}
