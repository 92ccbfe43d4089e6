//! CSI capture frames: parsing, persistence and amplitude features.
//!
//! Capture file layout, one frame per UTF-8 line:
//!
//! ```text
//! timestamp_us,re0,im0,re1,im1,...,re51,im51[,extra...]
//! ```
//!
//! Lines starting with `#` are comments. The writer emits a
//! `# sample_rate_hz=<value>` comment that the reader picks up again.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::matrix::Matrix;

pub const SUBCARRIERS: usize = 52;
pub const COEFFS_PER_FRAME: usize = 2 * SUBCARRIERS;
pub const NOMINAL_RATE_HZ: f64 = 100.0;
/// Gaps longer than this many nominal periods are reported.
pub const GAP_WARN_PERIODS: f64 = 3.0;

const RATE_TAG: &str = "# sample_rate_hz=";

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("malformed record {record}: expected {COEFFS_PER_FRAME} coefficients, found {found}")]
    Arity { record: usize, found: usize },
    #[error("malformed record {record}: cannot parse `{token}` as {what}")]
    Token {
        record: usize,
        token: String,
        what: &'static str,
    },
    #[error("frame has {0} subcarriers, expected {SUBCARRIERS}")]
    Subcarriers(usize),
    #[error("timestamps decrease at frame {index}: {prev} then {next}")]
    Timestamps { index: usize, prev: u64, next: u64 },
    #[error("requested {requested} subcarriers but only {available} are available")]
    Dimension { requested: usize, available: usize },
    #[error("capture not found: {0}")]
    NotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CsiError {
    pub fn class(&self) -> &'static str {
        match self {
            CsiError::Arity { .. } | CsiError::Token { .. } => "malformed-record",
            CsiError::Subcarriers(_) | CsiError::Dimension { .. } => "dimension",
            CsiError::Timestamps { .. } => "timestamp-order",
            CsiError::NotFound(_) => "capture-not-found",
            CsiError::Io { .. } => "io",
        }
    }
}

/// One complex channel coefficient as reported by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Iq {
    pub re: i16,
    pub im: i16,
}

impl Iq {
    pub fn new(re: i16, im: i16) -> Self {
        Self { re, im }
    }

    pub fn modulus(self) -> f64 {
        f64::from(self.re).hypot(f64::from(self.im))
    }
}

/// One capture sample: a timestamp plus 52 subcarrier coefficients in
/// receive order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsiFrame {
    pub timestamp_us: u64,
    iq: Vec<Iq>,
}

impl CsiFrame {
    pub fn new(timestamp_us: u64, iq: Vec<Iq>) -> Result<Self, CsiError> {
        if iq.len() != SUBCARRIERS {
            return Err(CsiError::Subcarriers(iq.len()));
        }
        Ok(Self { timestamp_us, iq })
    }

    pub fn iq(&self) -> &[Iq] {
        &self.iq
    }
}

/// Per-subcarrier channel magnitude of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    pub values: Vec<f64>,
}

/// An ordered capture with non-decreasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSet {
    frames: Vec<CsiFrame>,
    pub sample_rate_hz: f64,
}

/// A hole in the capture longer than [`GAP_WARN_PERIODS`] nominal periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub after_frame: usize,
    pub duration_us: u64,
}

impl CaptureSet {
    pub fn new(frames: Vec<CsiFrame>, sample_rate_hz: f64) -> Result<Self, CsiError> {
        for (i, w) in frames.windows(2).enumerate() {
            if w[1].timestamp_us < w[0].timestamp_us {
                return Err(CsiError::Timestamps {
                    index: i + 1,
                    prev: w[0].timestamp_us,
                    next: w[1].timestamp_us,
                });
            }
        }
        Ok(Self {
            frames,
            sample_rate_hz,
        })
    }

    pub fn empty(sample_rate_hz: f64) -> Self {
        Self {
            frames: Vec::new(),
            sample_rate_hz,
        }
    }

    pub fn frames(&self) -> &[CsiFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<CsiFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn gaps(&self) -> Vec<Gap> {
        let limit = GAP_WARN_PERIODS * 1e6 / self.sample_rate_hz;
        self.frames
            .windows(2)
            .enumerate()
            .filter_map(|(i, w)| {
                let d = w[1].timestamp_us - w[0].timestamp_us;
                (d as f64 > limit).then_some(Gap {
                    after_frame: i,
                    duration_us: d,
                })
            })
            .collect()
    }

    /// Amplitude matrix, one row per frame and one column per subcarrier.
    pub fn amplitudes(&self) -> Matrix<f64> {
        amplitude_matrix(&self.frames)
    }
}

pub fn amplitude_matrix(frames: &[CsiFrame]) -> Matrix<f64> {
    let mut m = Matrix::zeros(frames.len(), SUBCARRIERS);
    for (r, f) in frames.iter().enumerate() {
        for (dst, iq) in m.row_mut(r).iter_mut().zip(f.iq()) {
            *dst = iq.modulus();
        }
    }
    m
}

/// Parses one capture record. `record` is only used for error messages.
pub fn parse_frame(line: &str, record: usize) -> Result<CsiFrame, CsiError> {
    let mut tokens = line.trim().split(',').map(str::trim);
    let ts_tok = tokens.next().unwrap_or("");
    let timestamp_us = ts_tok.parse::<u64>().map_err(|_| CsiError::Token {
        record,
        token: ts_tok.to_string(),
        what: "a timestamp",
    })?;
    let coeffs: Vec<&str> = tokens.take(COEFFS_PER_FRAME).collect();
    if coeffs.len() != COEFFS_PER_FRAME {
        return Err(CsiError::Arity {
            record,
            found: coeffs.len(),
        });
    }
    let parse = |tok: &str| {
        tok.parse::<i16>().map_err(|_| CsiError::Token {
            record,
            token: tok.to_string(),
            what: "a 16-bit integer coefficient",
        })
    };
    let mut iq = Vec::with_capacity(SUBCARRIERS);
    for pair in coeffs.chunks_exact(2) {
        iq.push(Iq::new(parse(pair[0])?, parse(pair[1])?));
    }
    CsiFrame::new(timestamp_us, iq)
}

pub fn format_frame(frame: &CsiFrame) -> String {
    let mut s = frame.timestamp_us.to_string();
    for iq in frame.iq() {
        s.push(',');
        s.push_str(&iq.re.to_string());
        s.push(',');
        s.push_str(&iq.im.to_string());
    }
    s
}

pub fn amplitude(frame: &CsiFrame) -> AmplitudeVector {
    AmplitudeVector {
        values: frame.iq().iter().map(|iq| iq.modulus()).collect(),
    }
}

/// Keeps the first `count` subcarrier columns of a `T x subcarriers` matrix.
pub fn select_subcarriers(series: &Matrix<f64>, count: usize) -> Result<Matrix<f64>, CsiError> {
    if count > series.cols() {
        return Err(CsiError::Dimension {
            requested: count,
            available: series.cols(),
        });
    }
    Ok(series.leading_columns(count))
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<CaptureSet, CsiError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CsiError::NotFound(path.to_path_buf()),
        _ => CsiError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let mut rate = NOMINAL_RATE_HZ;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CsiError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let trimmed = line.trim();
        if let Some(v) = trimmed.strip_prefix(RATE_TAG) {
            rate = v.trim().parse().map_err(|_| CsiError::Token {
                record: i + 1,
                token: v.to_string(),
                what: "a sample rate",
            })?;
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        frames.push(parse_frame(trimmed, i + 1)?);
    }
    let capture = CaptureSet::new(frames, rate)?;
    for gap in capture.gaps() {
        log::warn!(
            "{}: {} us gap after frame {}",
            path.display(),
            gap.duration_us,
            gap.after_frame
        );
    }
    Ok(capture)
}

pub fn write_capture(path: impl AsRef<Path>, capture: &CaptureSet) -> Result<(), CsiError> {
    let path = path.as_ref();
    let io = |e| CsiError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(w, "{RATE_TAG}{}", capture.sample_rate_hz).map_err(io)?;
    for f in capture.frames() {
        writeln!(w, "{}", format_frame(f)).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_frame(ts: u64, re: i16, im: i16) -> CsiFrame {
        CsiFrame::new(ts, vec![Iq::new(re, im); SUBCARRIERS]).unwrap()
    }

    fn record(ts: u64, n: usize) -> String {
        let mut s = ts.to_string();
        for i in 0..n {
            s.push_str(if i % 2 == 0 { ",1" } else { ",0" });
        }
        s
    }

    #[test]
    fn parses_all_ones() {
        let f = parse_frame(&record(0, 104), 1).unwrap();
        assert_eq!(f, uniform_frame(0, 1, 0));
    }

    #[test]
    fn rejects_short_record() {
        let err = parse_frame(&record(0, 103), 7).unwrap_err();
        assert!(matches!(
            err,
            CsiError::Arity {
                record: 7,
                found: 103
            }
        ));
        assert_eq!(err.class(), "malformed-record");
    }

    #[test]
    fn rejects_non_integer() {
        let line = record(0, 104).replacen(",0", ",0.5", 1);
        assert!(matches!(
            parse_frame(&line, 3),
            Err(CsiError::Token { record: 3, .. })
        ));
    }

    #[test]
    fn trailing_metadata_is_ignored() {
        let line = format!("{},-61,aa:bb:cc:dd:ee:ff", record(5, 104));
        assert_eq!(parse_frame(&line, 1).unwrap(), uniform_frame(5, 1, 0));
    }

    #[test]
    fn hundred_hz_cadence_is_ordered() {
        let frames = [0, 10_000, 20_000].map(|t| uniform_frame(t, 1, 0)).to_vec();
        let c = CaptureSet::new(frames, NOMINAL_RATE_HZ).unwrap();
        assert!(c.gaps().is_empty());
        let frames = [10_000, 0].map(|t| uniform_frame(t, 1, 0)).to_vec();
        assert!(CaptureSet::new(frames, NOMINAL_RATE_HZ).is_err());
    }

    #[test]
    fn long_gaps_are_flagged() {
        let frames = [0, 10_000, 60_000].map(|t| uniform_frame(t, 1, 0)).to_vec();
        let gaps = CaptureSet::new(frames, NOMINAL_RATE_HZ).unwrap().gaps();
        assert_eq!(
            gaps,
            vec![Gap {
                after_frame: 1,
                duration_us: 50_000
            }]
        );
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(Iq::new(3, 4).modulus(), 5.0);
        assert_eq!(Iq::new(0, 0).modulus(), 0.0);
        assert_eq!(Iq::new(-5, 12).modulus(), 13.0);
        let a = amplitude(&uniform_frame(0, 3, 4));
        assert_eq!(a.values, vec![5.0; SUBCARRIERS]);
    }

    #[test]
    fn subcarrier_selection() {
        let row: Vec<f64> = (0..52).map(f64::from).collect();
        let m = Matrix::from_rows(std::slice::from_ref(&row)).unwrap();
        assert_eq!(select_subcarriers(&m, 49).unwrap().row(0), &row[..49]);
        assert_eq!(select_subcarriers(&m, 52).unwrap(), m);
        assert!(matches!(
            select_subcarriers(&m, 53),
            Err(CsiError::Dimension { .. })
        ));
    }

    #[test]
    fn empty_file_is_empty_capture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        fs::write(&p, "").unwrap();
        assert!(read_capture(&p).unwrap().is_empty());
    }

    #[test]
    fn corrupt_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let text = format!("# header\n{}\n{}\n", record(0, 104), record(10_000, 90));
        fs::write(&p, text).unwrap();
        let err = read_capture(&p).unwrap_err();
        assert!(matches!(err, CsiError::Arity { record: 3, .. }), "{err}");
    }

    #[test]
    fn missing_file() {
        let err = read_capture("/nonexistent/capture.csv").unwrap_err();
        assert_eq!(err.class(), "capture-not-found");
    }

    fn arb_iq() -> impl Strategy<Value = Iq> {
        (any::<i16>(), any::<i16>()).prop_map(|(re, im)| Iq::new(re, im))
    }

    fn arb_capture() -> impl Strategy<Value = CaptureSet> {
        (
            prop::collection::vec(
                (0u64..50_000, prop::collection::vec(arb_iq(), SUBCARRIERS)),
                0..20,
            ),
            prop_oneof![Just(100.0), 1.0f64..1000.0],
        )
            .prop_map(|(steps, rate)| {
                let mut ts = 0;
                let frames = steps
                    .into_iter()
                    .map(|(dt, iq)| {
                        ts += dt;
                        CsiFrame::new(ts, iq).unwrap()
                    })
                    .collect();
                CaptureSet::new(frames, rate).unwrap()
            })
    }

    proptest! {
        #[test]
        fn modulus_bounds_and_symmetry(re in any::<i16>(), im in any::<i16>()) {
            let v = Iq::new(re, im).modulus();
            let (r, i) = (f64::from(re).abs(), f64::from(im).abs());
            prop_assert!(v >= r.max(i));
            prop_assert!(v <= r + i);
            let neg = Iq::new(re.saturating_neg(), im.saturating_neg());
            if re != i16::MIN && im != i16::MIN {
                prop_assert_eq!(neg.modulus(), v);
            }
        }

        #[test]
        fn capture_round_trip(capture in arb_capture()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.csv");
            write_capture(&p, &capture).unwrap();
            prop_assert_eq!(read_capture(&p).unwrap(), capture);
        }
    }

    #[test]
    fn hundred_frame_round_trip() {
        let frames = (0..100)
            .map(|i| {
                let iq = (0..SUBCARRIERS)
                    .map(|k| Iq::new((i * 7 + k as i16) % 50 - 25, (k as i16) - 20))
                    .collect();
                CsiFrame::new(i as u64 * 10_000, iq).unwrap()
            })
            .collect();
        let c = CaptureSet::new(frames, NOMINAL_RATE_HZ).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_capture(&p, &c).unwrap();
        assert_eq!(read_capture(&p).unwrap(), c);
    }
}
