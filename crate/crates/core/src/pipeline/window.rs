use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::PipelineError;
use crate::classes::ClassLabel;
use crate::csi::{amplitude, CsiFrame, SUBCARRIERS};
use crate::matrix::Matrix;

/// A preprocessed classifier input: `window_len x features`, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub features: Matrix<f32>,
    pub start_timestamp_us: u64,
    pub label: Option<ClassLabel>,
}

/// `window_len` consecutive amplitude vectors, before preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    /// Index of the first frame in the stream.
    pub start_frame: usize,
    pub start_timestamp_us: u64,
    /// `window_len x 52`.
    pub amplitudes: Matrix<f64>,
}

/// Number of windows a stream of `frames` frames yields.
pub fn window_count(frames: usize, window_len: usize, stride: usize) -> usize {
    if frames < window_len || window_len == 0 || stride == 0 {
        0
    } else {
        (frames - window_len) / stride + 1
    }
}

/// Groups frames into windows of `window_len`, starting a new one every
/// `stride` frames.
#[derive(Debug, Clone)]
pub struct Windower {
    window_len: usize,
    stride: usize,
    buf: VecDeque<(u64, Vec<f64>)>,
    /// Stream index of `buf[0]`.
    head: usize,
    /// Frames still to discard when `stride > window_len`.
    skip: usize,
    last_ts: Option<u64>,
    seen: usize,
}

impl Windower {
    pub fn new(window_len: usize, stride: usize) -> Result<Self, PipelineError> {
        if window_len == 0 || stride == 0 {
            return Err(PipelineError::Config(
                "window length and stride must be positive".into(),
            ));
        }
        Ok(Self {
            window_len,
            stride,
            buf: VecDeque::with_capacity(window_len),
            head: 0,
            skip: 0,
            last_ts: None,
            seen: 0,
        })
    }

    pub fn push(&mut self, frame: &CsiFrame) -> Result<Option<RawWindow>, PipelineError> {
        if let Some(prev) = self.last_ts {
            if frame.timestamp_us < prev {
                return Err(PipelineError::Ordering {
                    frame: self.seen,
                    previous_us: prev,
                    got_us: frame.timestamp_us,
                });
            }
        }
        self.last_ts = Some(frame.timestamp_us);
        let index = self.seen;
        self.seen += 1;
        if self.skip > 0 {
            self.skip -= 1;
            return Ok(None);
        }
        if self.buf.is_empty() {
            self.head = index;
        }
        self.buf
            .push_back((frame.timestamp_us, amplitude(frame).values));
        if self.buf.len() < self.window_len {
            return Ok(None);
        }
        let mut amplitudes = Matrix::zeros(self.window_len, SUBCARRIERS);
        for (r, (_, a)) in self.buf.iter().enumerate() {
            amplitudes.row_mut(r).copy_from_slice(a);
        }
        let out = RawWindow {
            start_frame: self.head,
            start_timestamp_us: self.buf[0].0,
            amplitudes,
        };
        if self.stride >= self.window_len {
            self.buf.clear();
            self.skip = self.stride - self.window_len;
        } else {
            self.buf.drain(..self.stride);
            self.head += self.stride;
        }
        Ok(Some(out))
    }
}

/// Header of the window file: one window per line, features row-major.
pub const WINDOW_HEADER: &str = "start_ts_us,label,rows,cols,features...";

pub fn format_windows(windows: &[Window]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{WINDOW_HEADER}");
    for w in windows {
        let label = w.label.map(|l| l.id().to_string()).unwrap_or_default();
        let (r, c) = w.features.shape();
        let _ = write!(s, "{},{label},{r},{c}", w.start_timestamp_us);
        for v in w.features.as_slice() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_windows(path: impl AsRef<Path>, windows: &[Window]) -> Result<(), PipelineError> {
    let path = path.as_ref();
    fs::write(path, format_windows(windows)).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_windows(text: &str) -> Result<Vec<Window>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == WINDOW_HEADER {
            continue;
        }
        let bad = |reason: &str| PipelineError::Record {
            line: i + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 4 {
            return Err(bad("expected at least 4 fields"));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad("bad integer"));
        let ts = int(f[0])?;
        let label = match f[1] {
            "" => None,
            id => Some(
                ClassLabel::from_id(int(id)? as usize).ok_or_else(|| bad("unknown class id"))?,
            ),
        };
        let (r, c) = (int(f[2])? as usize, int(f[3])? as usize);
        if f.len() != 4 + r * c {
            return Err(bad("feature count does not match rows x cols"));
        }
        let values = f[4..]
            .iter()
            .map(|v| v.parse::<f32>().map_err(|_| bad("bad feature value")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Window {
            features: Matrix::from_vec(r, c, values).expect("length checked"),
            start_timestamp_us: ts,
            label,
        });
    }
    Ok(out)
}

pub fn read_windows(path: impl AsRef<Path>) -> Result<Vec<Window>, PipelineError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_windows(&text)
}
