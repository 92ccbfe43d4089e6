use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::classes::ClassLabel;
use crate::csi::{CaptureSet, CsiFrame, Iq, SUBCARRIERS};

/// Temporal shape of a class signature within one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// Steady oscillation.
    Constant,
    /// Smooth level change of `width` frames; `rising` sets the direction and
    /// `tone_mix` the weight of the superposed oscillation.
    Step {
        width: f64,
        rising: bool,
        tone_mix: f64,
    },
    /// Short high-energy transient.
    Burst { width: f64 },
    /// Excursion down and back of `width` frames.
    Dip { width: f64 },
    /// No motion at all.
    Still,
}

/// Generator parameters of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub class: ClassLabel,
    /// Mean amplitude in iq units.
    pub base_amplitude: f64,
    /// Dominant modulation frequency.
    pub tone_hz: f64,
    /// Peak modulation in iq units.
    pub depth: f64,
    pub envelope: Envelope,
    /// Standard deviation of the additive amplitude noise.
    pub noise_std: f64,
    /// Per-segment randomization strength; 0 gives identical segments.
    pub jitter: f64,
    /// Frames per independently drawn segment.
    pub segment_len: usize,
    pub sample_rate_hz: f64,
}

impl ActivityProfile {
    /// The built-in signature of `class`.
    pub fn for_class(class: ClassLabel) -> Self {
        let (tone_hz, envelope) = match class {
            ClassLabel::LieDown => (
                0.3,
                Envelope::Step {
                    width: 40.0,
                    rising: false,
                    tone_mix: 0.2,
                },
            ),
            ClassLabel::Fall => (2.0, Envelope::Burst { width: 10.0 }),
            ClassLabel::Walk => (1.2, Envelope::Constant),
            ClassLabel::PickUp => (0.6, Envelope::Dip { width: 25.0 }),
            ClassLabel::Run => (2.6, Envelope::Constant),
            ClassLabel::SitDown => (
                1.4,
                Envelope::Step {
                    width: 10.0,
                    rising: false,
                    tone_mix: 0.8,
                },
            ),
            ClassLabel::StandUp => (
                1.6,
                Envelope::Step {
                    width: 15.0,
                    rising: true,
                    tone_mix: 0.3,
                },
            ),
            ClassLabel::NoPerson => (0.0, Envelope::Still),
        };
        Self {
            class,
            base_amplitude: 300.0,
            tone_hz,
            depth: match class {
                ClassLabel::NoPerson => 0.0,
                ClassLabel::Run => 16.0,
                _ => 40.0,
            },
            envelope,
            noise_std: 10.0,
            jitter: 1.0,
            segment_len: 200,
            sample_rate_hz: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let nyquist = self.sample_rate_hz / 2.0;
        if self.sample_rate_hz.is_nan() || self.sample_rate_hz <= 0.0 {
            return Err(SynthError::Config("sample rate must be positive".into()));
        }
        if !(0.0..nyquist).contains(&self.tone_hz) {
            return Err(SynthError::Config(format!(
                "{}: tone {} Hz is not below the {} Hz Nyquist limit",
                self.class, self.tone_hz, nyquist
            )));
        }
        if self.segment_len == 0 {
            return Err(SynthError::Config("segment length must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.depth >= 0.0 && self.base_amplitude > self.depth) {
            return Err(SynthError::Config(format!(
                "{}: invalid amplitude settings",
                self.class
            )));
        }
        Ok(())
    }

    /// Noise-free modulation at frame `t` of a segment.
    fn modulation(&self, seg: &Segment, t: f64) -> f64 {
        let fs = self.sample_rate_hz;
        let tone = |t: f64| (2.0 * PI * seg.freq * t / fs + seg.phase).sin();
        let gauss = |w: f64| (-((t - seg.centre) / w).powi(2)).exp();
        let shape = match self.envelope {
            Envelope::Still => return 0.0,
            Envelope::Constant => tone(t),
            Envelope::Step {
                width,
                rising,
                tone_mix,
            } => {
                let s = ((t - seg.centre) / width).tanh();
                (if rising { s } else { -s }) + tone_mix * tone(t)
            }
            Envelope::Burst { width } => gauss(width) * (1.5 + 0.5 * tone(t - seg.centre)),
            Envelope::Dip { width } => -gauss(width) + 0.3 * tone(t),
        };
        seg.depth * shape
    }
}

/// Randomized parameters of one segment.
struct Segment {
    freq: f64,
    phase: f64,
    centre: f64,
    depth: f64,
}

/// Relative modulation strength of subcarrier `k`.
fn subcarrier_gain(k: usize) -> f64 {
    0.4 + 0.6 * (0.37 * k as f64 + 1.0).sin().abs()
}

fn subcarrier_base(k: usize) -> f64 {
    0.7 + 0.6 * (k as f64 * 0.618_033_988_75).fract()
}

/// Draws `n_frames` frames of `profile`. Deterministic in `(seed, class)`.
///
/// Each subcarrier's amplitude is `base + gain * modulation + noise`; it is
/// encoded as an iq pair with a random carrier phase and rounded to integers.
pub fn generate_capture(
    profile: &ActivityProfile,
    n_frames: usize,
    seed: u64,
) -> Result<CaptureSet, SynthError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(profile.class.id() as u64);
    let noise =
        Normal::new(0.0, profile.noise_std).map_err(|e| SynthError::Config(e.to_string()))?;
    let len = profile.segment_len as f64;
    let j = profile.jitter;
    let period_us = 1e6 / profile.sample_rate_hz;
    let mut frames = Vec::with_capacity(n_frames);
    let mut seg = None;
    for i in 0..n_frames {
        let t = (i % profile.segment_len) as f64;
        if i % profile.segment_len == 0 {
            seg = Some(Segment {
                freq: profile.tone_hz * (1.0 + j * rng.random_range(-0.1..=0.1)),
                phase: j * rng.random_range(0.0..2.0 * PI),
                centre: len * (0.5 + j * rng.random_range(-0.15..=0.15)),
                depth: profile.depth * (1.0 + j * rng.random_range(-0.2..=0.2)),
            });
        }
        let m = profile.modulation(seg.as_ref().expect("set at segment start"), t);
        let iq = (0..SUBCARRIERS)
            .map(|k| {
                let a = profile.base_amplitude * subcarrier_base(k)
                    + subcarrier_gain(k) * m
                    + noise.sample(&mut rng);
                let a = a.clamp(0.0, f64::from(i16::MAX) - 1.0);
                let theta = rng.random_range(0.0..2.0 * PI);
                Iq::new(
                    (a * theta.cos()).round() as i16,
                    (a * theta.sin()).round() as i16,
                )
            })
            .collect();
        frames.push(CsiFrame::new((i as f64 * period_us).round() as u64, iq)?);
    }
    Ok(CaptureSet::new(frames, profile.sample_rate_hz)?)
}
