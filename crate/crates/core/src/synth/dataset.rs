use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::{generate_capture, ActivityProfile};
use super::SynthError;
use crate::classes::ClassLabel;
use crate::csi::{amplitude_matrix, CaptureSet, CsiFrame};
use crate::dsp::{DspConfig, Preprocessor};
use crate::exec::Exec;
use crate::pipeline::{featurize, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub frames_per_class: usize,
    pub classes: Vec<ClassLabel>,
    /// Fraction of each class's windows used for training.
    pub split_ratio: f64,
    pub window_len: usize,
    pub sample_rate_hz: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames_per_class: 2000,
            classes: ClassLabel::ALL.to_vec(),
            split_ratio: 0.8,
            window_len: 200,
            sample_rate_hz: 100.0,
            noise_std: 10.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(SynthError::Config(format!(
                "split ratio {} is not in (0, 1)",
                self.split_ratio
            )));
        }
        if self.window_len == 0 || self.frames_per_class < self.window_len {
            return Err(SynthError::Config(format!(
                "{} frames per class do not fill one {}-frame window",
                self.frames_per_class, self.window_len
            )));
        }
        if self.classes.is_empty() {
            return Err(SynthError::Config("no classes selected".into()));
        }
        Ok(())
    }

    pub fn profile(&self, class: ClassLabel) -> ActivityProfile {
        ActivityProfile {
            noise_std: self.noise_std,
            segment_len: self.window_len,
            sample_rate_hz: self.sample_rate_hz,
            ..ActivityProfile::for_class(class)
        }
    }
}

/// Frames `start_frame..end_frame` of a capture belong to `class`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpan {
    pub start_frame: usize,
    pub end_frame: usize,
    pub class: ClassLabel,
}

pub const LABEL_HEADER: &str = "start_frame,end_frame,class_id,class_name";

/// One block of `frames_per_class` frames per class, back to back, with
/// continuous timestamps.
pub fn generate_labeled_capture(
    cfg: &SynthConfig,
    exec: Exec,
) -> Result<(CaptureSet, Vec<LabelSpan>), SynthError> {
    cfg.validate()?;
    let blocks = exec.map(&cfg.classes, |&c| {
        generate_capture(&cfg.profile(c), cfg.frames_per_class, cfg.seed)
    });
    let period_us = 1e6 / cfg.sample_rate_hz;
    let mut frames: Vec<CsiFrame> = Vec::with_capacity(cfg.frames_per_class * cfg.classes.len());
    let mut spans = Vec::new();
    for (&class, block) in cfg.classes.iter().zip(blocks) {
        let start = frames.len();
        for mut f in block?.into_frames() {
            f.timestamp_us = (frames.len() as f64 * period_us).round() as u64;
            frames.push(f);
        }
        spans.push(LabelSpan {
            start_frame: start,
            end_frame: frames.len(),
            class,
        });
    }
    Ok((CaptureSet::new(frames, cfg.sample_rate_hz)?, spans))
}

pub fn format_labels(spans: &[LabelSpan]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{LABEL_HEADER}");
    for l in spans {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            l.start_frame,
            l.end_frame,
            l.class.id(),
            l.class.name()
        );
    }
    s
}

pub fn write_labels(path: impl AsRef<Path>, spans: &[LabelSpan]) -> Result<(), SynthError> {
    let path = path.as_ref();
    fs::write(path, format_labels(spans)).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelSpan>, SynthError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, reason: &str| SynthError::Labels {
        line,
        reason: reason.to_string(),
    };
    let mut spans = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == LABEL_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(i + 1, "expected 4 fields"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(i + 1, "bad integer"));
        let (start_frame, end_frame, id) = (num(f[0])?, num(f[1])?, num(f[2])?);
        let class = ClassLabel::from_id(id).ok_or_else(|| bad(i + 1, "unknown class id"))?;
        if class.name() != f[3] {
            return Err(bad(i + 1, "class id and name disagree"));
        }
        if end_frame <= start_frame {
            return Err(bad(i + 1, "empty span"));
        }
        spans.push(LabelSpan {
            start_frame,
            end_frame,
            class,
        });
    }
    Ok(spans)
}

/// Cuts each span into consecutive non-overlapping windows and preprocesses
/// them. No window crosses a span boundary.
pub fn labelled_windows(
    capture: &CaptureSet,
    spans: &[LabelSpan],
    window_len: usize,
    dsp: &DspConfig,
    exec: Exec,
) -> Result<Vec<Window>, SynthError> {
    let pre = Preprocessor::new(dsp.clone())?;
    let frames = capture.frames();
    let mut jobs = Vec::new();
    for span in spans {
        if span.end_frame > frames.len() {
            return Err(SynthError::Config(format!(
                "label span {}..{} exceeds the {}-frame capture",
                span.start_frame,
                span.end_frame,
                frames.len()
            )));
        }
        let mut s = span.start_frame;
        while s + window_len <= span.end_frame {
            jobs.push((s, span.class));
            s += window_len;
        }
    }
    exec.map(&jobs, |&(s, class)| -> Result<Window, SynthError> {
        let chunk = &frames[s..s + window_len];
        Ok(Window {
            features: featurize(&pre, &amplitude_matrix(chunk), Exec::Sequential)?,
            start_timestamp_us: chunk[0].timestamp_us,
            label: Some(class),
        })
    })
    .into_iter()
    .collect()
}

/// Per class, the first `round(n * ratio)` windows in time order train and
/// the rest test. Each side keeps at least one window.
pub fn split_stratified(
    windows: Vec<Window>,
    ratio: f64,
) -> Result<(Vec<Window>, Vec<Window>), SynthError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in ClassLabel::ALL {
        let of_class: Vec<Window> = windows
            .iter()
            .filter(|w| w.label == Some(class))
            .cloned()
            .collect();
        let n = of_class.len();
        if n == 0 {
            continue;
        }
        if n < 2 {
            return Err(SynthError::Config(format!(
                "{class} has {n} window, need at least 2 to split"
            )));
        }
        let k = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
        let mut it = of_class.into_iter();
        train.extend(it.by_ref().take(k));
        test.extend(it);
    }
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
}

/// Generates, preprocesses and splits a synthetic dataset.
pub fn build_dataset(
    cfg: &SynthConfig,
    dsp: &DspConfig,
    exec: Exec,
) -> Result<Dataset, SynthError> {
    let (capture, spans) = generate_labeled_capture(cfg, exec)?;
    let windows = labelled_windows(&capture, &spans, cfg.window_len, dsp, exec)?;
    let (train, test) = split_stratified(windows, cfg.split_ratio)?;
    Ok(Dataset { train, test })
}
