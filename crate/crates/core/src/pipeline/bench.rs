use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::stream::{featurize, run_stream, InferenceResult, PipelineConfig, StreamMode};
use super::window::Windower;
use super::PipelineError;
use crate::csi::CsiFrame;
use crate::dsp::Preprocessor;
use crate::exec::Exec;
use crate::gru::GruNetwork;
use crate::matrix::Matrix;
use crate::quant::{Classifier, QuantGruNetwork};

/// Shortest benchmark accepted.
pub const MIN_BENCH_DURATION: Duration = Duration::from_secs(1);

/// CPU time consumed by the calling thread.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50_us: u64,
    pub p99_us: u64,
    pub max_us: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_unstable();
        let rank = |p: f64| -> u64 {
            if s.is_empty() {
                return 0;
            }
            let k = ((p * s.len() as f64).ceil() as usize).clamp(1, s.len());
            s[k - 1]
        };
        Self {
            p50_us: rank(0.50),
            p99_us: rank(0.99),
            max_us: s.last().copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub duration_s: f64,
    /// Complete replays of the capture.
    pub passes: usize,
    pub frames: usize,
    pub windows: usize,
    pub frames_per_s: f64,
    pub windows_per_s: f64,
    pub ingest: LatencyStats,
    pub dsp: LatencyStats,
    pub inference: LatencyStats,
    pub end_to_end: LatencyStats,
    /// Inference-only CPU time per window, measured on the same windows.
    pub fp32_cpu_us_per_window: f64,
    pub int8_cpu_us_per_window: f64,
    pub cpu_windows_measured: usize,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} frames, {} windows in {:.2} s over {} passes",
            self.frames, self.windows, self.duration_s, self.passes
        );
        let _ = writeln!(
            s,
            "throughput: {:.1} frames/s, {:.2} windows/s",
            self.frames_per_s, self.windows_per_s
        );
        let _ = writeln!(
            s,
            "{:<11} {:>10} {:>10} {:>10}",
            "stage", "p50 us", "p99 us", "max us"
        );
        for (name, st) in [
            ("ingest", &self.ingest),
            ("dsp", &self.dsp),
            ("inference", &self.inference),
            ("end-to-end", &self.end_to_end),
        ] {
            let _ = writeln!(
                s,
                "{:<11} {:>10} {:>10} {:>10}",
                name, st.p50_us, st.p99_us, st.max_us
            );
        }
        let _ = writeln!(
            s,
            "cpu per window: fp32 {:.1} us, int8 {:.1} us ({} windows)",
            self.fp32_cpu_us_per_window, self.int8_cpu_us_per_window, self.cpu_windows_measured
        );
        s
    }
}

/// Replays `frames` through the threaded pipeline with the FP32 model until
/// `duration` has elapsed, then measures inference CPU time of both
/// precisions on the same preprocessed windows.
pub fn benchmark(
    frames: &[CsiFrame],
    fp32: &GruNetwork<f32>,
    int8: &QuantGruNetwork,
    cfg: &PipelineConfig,
    duration: Duration,
) -> Result<BenchReport, PipelineError> {
    if duration < MIN_BENCH_DURATION {
        return Err(PipelineError::Measurement(format!(
            "duration {:.3} s is below the {} s minimum",
            duration.as_secs_f64(),
            MIN_BENCH_DURATION.as_secs()
        )));
    }
    if fp32.config() != int8.config() {
        return Err(PipelineError::Config(
            "fp32 and int8 models differ in architecture".into(),
        ));
    }
    let windows = featurized_windows(frames, cfg)?;
    if windows.is_empty() {
        return Err(PipelineError::Measurement(
            "capture holds no complete window".into(),
        ));
    }

    // Warm-up pass, not counted.
    run_stream(frames, fp32, cfg, StreamMode::Threaded)?;
    let mut results: Vec<InferenceResult> = Vec::new();
    let mut passes = 0;
    let mut frame_count = 0;
    let start = Instant::now();
    while start.elapsed() < duration {
        let out = run_stream(frames, fp32, cfg, StreamMode::Threaded)?;
        frame_count += out.frames;
        results.extend(out.results);
        passes += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let collect = |f: fn(&InferenceResult) -> u64| -> LatencyStats {
        LatencyStats::from_samples(&results.iter().map(f).collect::<Vec<_>>())
    };

    // Alternate the order each round so neither precision always runs warm.
    let mut cpu = [Duration::ZERO; 2];
    let rounds = 4;
    for round in 0..rounds {
        let order: [usize; 2] = if round % 2 == 0 { [0, 1] } else { [1, 0] };
        for which in order {
            let model: &dyn Classifier = if which == 0 { fp32 } else { int8 };
            let t = thread_cpu_time();
            for w in &windows {
                std::hint::black_box(model.logits(w)?);
            }
            cpu[which] += thread_cpu_time() - t;
        }
    }
    let measured = rounds * windows.len();
    let per_window = |d: Duration| d.as_secs_f64() * 1e6 / measured as f64;
    Ok(BenchReport {
        duration_s: elapsed,
        passes,
        frames: frame_count,
        windows: results.len(),
        frames_per_s: frame_count as f64 / elapsed,
        windows_per_s: results.len() as f64 / elapsed,
        ingest: collect(|r| r.ingest_us),
        dsp: collect(|r| r.dsp_us),
        inference: collect(|r| r.inference_us),
        end_to_end: collect(|r| r.latency_us),
        fp32_cpu_us_per_window: per_window(cpu[0]),
        int8_cpu_us_per_window: per_window(cpu[1]),
        cpu_windows_measured: measured,
    })
}

fn featurized_windows(
    frames: &[CsiFrame],
    cfg: &PipelineConfig,
) -> Result<Vec<Matrix<f32>>, PipelineError> {
    let pre = Preprocessor::new(cfg.dsp.clone())?;
    let mut windower = Windower::new(cfg.window_len, cfg.stride)?;
    let mut out = Vec::new();
    for f in frames {
        if let Some(raw) = windower.push(f)? {
            out.push(featurize(&pre, &raw.amplitudes, Exec::Sequential)?);
        }
    }
    Ok(out)
}
