use serde::{Deserialize, Serialize};

use super::QuantError;

/// Rounds half away from zero (`f64::round`).
#[inline]
fn round_away(v: f64) -> f64 {
    v.round()
}

/// Symmetric per-tensor INT8 weights: `x ~ q * scale`, `q` in `[-127, 127]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantTensor {
    pub values: Vec<i8>,
    pub scale: f32,
    /// Always 0 for symmetric tensors.
    pub zero_point: i32,
    pub shape: (usize, usize),
}

impl QuantTensor {
    pub fn row(&self, r: usize) -> &[i8] {
        let c = self.shape.1;
        &self.values[r * c..(r + 1) * c]
    }

    pub fn dequantize(&self) -> Vec<f32> {
        self.values
            .iter()
            .map(|&q| (q as i32 - self.zero_point) as f32 * self.scale)
            .collect()
    }

    /// Stored size: one byte per value plus the scale and zero point.
    pub fn payload_bytes(&self) -> usize {
        self.values.len() + 8
    }
}

/// `scale = max|x| / 127` (1 for an all-zero tensor) and
/// `q = clamp(round(x / scale), -127, 127)` with ties away from zero.
///
/// The integer codes are computed as `x * 127 / max|x|` in double precision so
/// they do not depend on how the scale rounds to `f32`.
pub fn quantize_tensor(x: &[f32], shape: (usize, usize)) -> Result<QuantTensor, QuantError> {
    if shape.0 * shape.1 != x.len() {
        return Err(QuantError::Shape(format!(
            "{} values do not fill a {}x{} tensor",
            x.len(),
            shape.0,
            shape.1
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(QuantError::NonFinite { index: i });
    }
    let max = x.iter().fold(0.0f64, |m, &v| m.max(f64::from(v).abs()));
    let (scale, values) = if max == 0.0 {
        (1.0, vec![0; x.len()])
    } else {
        let values = x
            .iter()
            .map(|&v| round_away(f64::from(v) * 127.0 / max).clamp(-127.0, 127.0) as i8)
            .collect();
        ((max / 127.0) as f32, values)
    };
    Ok(QuantTensor {
        values,
        scale,
        zero_point: 0,
        shape,
    })
}

/// Asymmetric per-tensor activation quantizer over `[-128, 127]`.
///
/// The observed range is widened to contain 0 so that 0 maps exactly onto
/// `zero_point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActQuant {
    pub scale: f32,
    pub zero_point: i32,
}

impl ActQuant {
    pub fn from_range(min: f32, max: f32) -> Self {
        let (min, max) = (f64::from(min.min(0.0)), f64::from(max.max(0.0)));
        let span = max - min;
        if span == 0.0 || !span.is_finite() {
            return Self {
                scale: 1.0,
                zero_point: 0,
            };
        }
        let scale = (span / 255.0) as f32;
        let zero_point = round_away(-128.0 - min / f64::from(scale)).clamp(-128.0, 127.0) as i32;
        Self { scale, zero_point }
    }

    #[inline]
    pub fn quantize(&self, v: f32) -> i8 {
        let q = round_away(f64::from(v) / f64::from(self.scale)) + f64::from(self.zero_point);
        q.clamp(-128.0, 127.0) as i8
    }

    pub fn quantize_into(&self, xs: &[f32], out: &mut [i8]) {
        for (o, &v) in out.iter_mut().zip(xs) {
            *o = self.quantize(v);
        }
    }

    #[inline]
    pub fn dequantize(&self, q: i8) -> f32 {
        (q as i32 - self.zero_point) as f32 * self.scale
    }
}

/// Running min/max observer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RangeObserver {
    min: f32,
    max: f32,
}

impl Default for RangeObserver {
    fn default() -> Self {
        Self { min: 0.0, max: 0.0 }
    }
}

impl RangeObserver {
    pub(crate) fn observe(&mut self, xs: &[f32]) {
        for &v in xs {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    pub(crate) fn finish(self) -> ActQuant {
        ActQuant::from_range(self.min, self.max)
    }
}
