use std::fmt::Write as _;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::queue::{BoundedQueue, DropPolicy};
use super::window::{RawWindow, Windower};
use super::PipelineError;
use crate::classes::ClassLabel;
use crate::csi::CsiFrame;
use crate::dsp::{DspConfig, DspError, Preprocessor};
use crate::exec::Exec;
use crate::gru::{decide, DEFAULT_PRESENCE_THRESHOLD};
use crate::matrix::Matrix;
use crate::quant::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_len: usize,
    pub stride: usize,
    /// Windows buffered between two stages.
    pub queue_capacity: usize,
    pub drop_policy: DropPolicy,
    /// Empty-room probability above which the activity decision is suppressed.
    pub presence_threshold: f64,
    pub dsp: DspConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_len: 200,
            stride: 200,
            queue_capacity: 4,
            drop_policy: DropPolicy::Block,
            presence_threshold: DEFAULT_PRESENCE_THRESHOLD,
            dsp: DspConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.window_len == 0 || self.stride == 0 {
            return Err(PipelineError::Config(
                "window_len and stride must be at least 1".into(),
            ));
        }
        if self.queue_capacity < 2 {
            return Err(PipelineError::Config(
                "queue_capacity must be at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.presence_threshold) {
            return Err(PipelineError::Config(
                "presence_threshold must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamMode {
    /// Ingest, DSP and inference on separate threads.
    #[default]
    Threaded,
    /// All stages inline on the calling thread.
    SingleThreaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub start_timestamp_us: u64,
    /// Probability that somebody is present.
    pub presence_prob: f64,
    /// Softmax over the seven activities in reporting order.
    pub activity_probs: Vec<f64>,
    pub label: ClassLabel,
    pub ingest_us: u64,
    pub dsp_us: u64,
    pub inference_us: u64,
    /// From the window's last frame arriving to this result existing.
    pub latency_us: u64,
}

#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub results: Vec<InferenceResult>,
    pub frames: usize,
    pub elapsed: Duration,
    /// High-water marks of the ingest->dsp and dsp->inference queues.
    pub high_water: [usize; 2],
    pub dropped: usize,
}

/// Preprocesses a `T x 52` amplitude block into classifier features.
pub fn featurize(
    pre: &Preprocessor,
    amplitudes: &Matrix<f64>,
    exec: Exec,
) -> Result<Matrix<f32>, DspError> {
    Ok(pre.process(amplitudes, exec)?.map(|v| v as f32))
}

/// Rejects a model whose input or heads do not fit the pipeline.
pub fn check_model(model: &dyn Classifier, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let m = model.config();
    if m.input_size != cfg.dsp.subcarriers_kept {
        return Err(PipelineError::Config(format!(
            "model expects {} features per frame, preprocessing produces {}",
            m.input_size, cfg.dsp.subcarriers_kept
        )));
    }
    if m.activity_classes != ClassLabel::ACTIVITIES || m.presence_classes != 2 {
        return Err(PipelineError::Config(format!(
            "model heads are {}/{}, expected {}/2",
            m.activity_classes,
            m.presence_classes,
            ClassLabel::ACTIVITIES
        )));
    }
    Ok(())
}

fn micros(d: Duration) -> u64 {
    d.as_micros() as u64
}

struct Emitted {
    raw: RawWindow,
    ingest_us: u64,
    at: Instant,
}

struct Featured {
    start_timestamp_us: u64,
    features: Matrix<f32>,
    ingest_us: u64,
    dsp_us: u64,
    at: Instant,
}

fn dsp_stage(pre: &Preprocessor, e: Emitted) -> Result<Featured, PipelineError> {
    let t = Instant::now();
    let features = featurize(pre, &e.raw.amplitudes, Exec::Sequential)?;
    Ok(Featured {
        start_timestamp_us: e.raw.start_timestamp_us,
        features,
        ingest_us: e.ingest_us,
        dsp_us: micros(t.elapsed()),
        at: e.at,
    })
}

fn infer_stage(
    model: &dyn Classifier,
    threshold: f64,
    f: Featured,
) -> Result<InferenceResult, PipelineError> {
    let t = Instant::now();
    let (a, p) = model.logits(&f.features)?;
    let pred = decide(&a, &p, threshold);
    let done = Instant::now();
    Ok(InferenceResult {
        start_timestamp_us: f.start_timestamp_us,
        presence_prob: pred.presence_prob,
        activity_probs: pred.activity_probs,
        label: pred.label,
        ingest_us: f.ingest_us,
        dsp_us: f.dsp_us,
        inference_us: micros(done - t),
        latency_us: micros(done - f.at),
    })
}

/// Feeds `frames` through windowing, preprocessing and inference.
///
/// Every complete window yields one result, in window order. With
/// [`DropPolicy::DropOldest`] windows may be evicted under load; the count is
/// reported in [`StreamOutput::dropped`].
pub fn run_stream(
    frames: &[CsiFrame],
    model: &dyn Classifier,
    cfg: &PipelineConfig,
    mode: StreamMode,
) -> Result<StreamOutput, PipelineError> {
    cfg.validate()?;
    check_model(model, cfg)?;
    let pre = Preprocessor::new(cfg.dsp.clone())?;
    let mut windower = Windower::new(cfg.window_len, cfg.stride)?;
    let start = Instant::now();
    let threshold = cfg.presence_threshold;
    match mode {
        StreamMode::SingleThreaded => {
            let mut results = Vec::new();
            let mut ingest = Duration::ZERO;
            for f in frames {
                let t = Instant::now();
                let raw = windower.push(f)?;
                ingest += t.elapsed();
                if let Some(raw) = raw {
                    let e = Emitted {
                        raw,
                        ingest_us: micros(std::mem::take(&mut ingest)),
                        at: Instant::now(),
                    };
                    results.push(infer_stage(model, threshold, dsp_stage(&pre, e)?)?);
                }
            }
            Ok(StreamOutput {
                results,
                frames: frames.len(),
                elapsed: start.elapsed(),
                high_water: [0, 0],
                dropped: 0,
            })
        }
        StreamMode::Threaded => {
            let q1 = BoundedQueue::<Emitted>::new(cfg.queue_capacity, cfg.drop_policy);
            let q2 = BoundedQueue::<Featured>::new(cfg.queue_capacity, cfg.drop_policy);
            let (ingest_res, dsp_res, infer_res) = thread::scope(|s| {
                let ingest = s.spawn(|| -> Result<(), PipelineError> {
                    let mut spent = Duration::ZERO;
                    let out = (|| {
                        for f in frames {
                            let t = Instant::now();
                            let raw = windower.push(f)?;
                            spent += t.elapsed();
                            if let Some(raw) = raw {
                                let e = Emitted {
                                    raw,
                                    ingest_us: micros(std::mem::take(&mut spent)),
                                    at: Instant::now(),
                                };
                                if q1.push(e).is_err() {
                                    break;
                                }
                            }
                        }
                        Ok(())
                    })();
                    q1.close();
                    out
                });
                let dsp = s.spawn(|| -> Result<(), PipelineError> {
                    let out = (|| {
                        while let Some(e) = q1.pop() {
                            if q2.push(dsp_stage(&pre, e)?).is_err() {
                                break;
                            }
                        }
                        Ok(())
                    })();
                    q1.close();
                    q2.close();
                    out
                });
                let mut results = Vec::new();
                let infer: Result<(), PipelineError> = (|| {
                    while let Some(f) = q2.pop() {
                        results.push(infer_stage(model, threshold, f)?);
                    }
                    Ok(())
                })();
                q2.close();
                q1.close();
                let ingest = ingest.join().expect("ingest stage panicked");
                let dsp = dsp.join().expect("dsp stage panicked");
                (ingest, dsp, infer.map(|()| results))
            });
            ingest_res?;
            dsp_res?;
            let results = infer_res?;
            Ok(StreamOutput {
                results,
                frames: frames.len(),
                elapsed: start.elapsed(),
                high_water: [q1.high_water(), q2.high_water()],
                dropped: q1.dropped() + q2.dropped(),
            })
        }
    }
}

pub const RESULT_HEADER: &str =
    "start_ts_us,presence_prob,p_lie,p_fall,p_walk,p_pickup,p_run,p_sit,p_stand,label,latency_us";

/// One line per result under [`RESULT_HEADER`]. Probabilities use the
/// shortest representation that parses back to the same `f64`.
pub fn format_results(results: &[InferenceResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{RESULT_HEADER}");
    for r in results {
        let _ = write!(s, "{},{}", r.start_timestamp_us, r.presence_prob);
        for p in &r.activity_probs {
            let _ = write!(s, ",{p}");
        }
        let _ = writeln!(s, ",{},{}", r.label.name(), r.latency_us);
    }
    s
}
