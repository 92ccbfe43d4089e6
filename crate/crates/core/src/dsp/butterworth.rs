use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::DspError;

/// One second-order section, `a0 = 1`. First-order sections have `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, zinv: Complex64) -> Complex64 {
        let zinv2 = zinv * zinv;
        (self.b0 + self.b1 * zinv + self.b2 * zinv2) / (1.0 + self.a1 * zinv + self.a2 * zinv2)
    }

    /// Roots of `z^2 + a1 z + a2` (or `z + a1` for a first-order section).
    fn poles(&self) -> Vec<Complex64> {
        if self.a2 == 0.0 {
            return vec![Complex64::new(-self.a1, 0.0)];
        }
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        vec![(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// Digital Butterworth low-pass filter.
///
/// `b` holds `b_0..b_N`, `a` holds `a_1..a_N` (`a_0 = 1` is implicit). The
/// cascaded `sections` realize the same transfer function and are what
/// [`apply_iir`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub order: usize,
    pub sample_rate_hz: f64,
    pub cutoff_hz: f64,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub sections: Vec<Biquad>,
}

/// Designs an order-`order` Butterworth low-pass by bilinear transform of the
/// analog prototype. The cutoff is pre-warped so the digital -3 dB point
/// lands on `cutoff_hz`.
pub fn design_butterworth(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<IirFilter, DspError> {
    if order == 0 {
        return Err(DspError::Design("order must be at least 1".into()));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(DspError::Design(format!(
            "sample rate {sample_rate_hz} Hz must be positive"
        )));
    }
    let nyquist = sample_rate_hz / 2.0;
    if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(DspError::Design(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }

    let k = 2.0 * sample_rate_hz;
    let warped = k * (PI * cutoff_hz / sample_rate_hz).tan();
    let bilinear = |p: Complex64| {
        let s = p * warped;
        (k + s) / (k - s)
    };

    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for m in 0..order / 2 {
        let z = bilinear(prototype_pole(order, m));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad {
            b0: g,
            b1: 2.0 * g,
            b2: g,
            a1,
            a2,
        });
    }
    if order % 2 == 1 {
        let z = bilinear(prototype_pole(order, order / 2)).re;
        let g = (1.0 - z) / 2.0;
        sections.push(Biquad {
            b0: g,
            b1: g,
            b2: 0.0,
            a1: -z,
            a2: 0.0,
        });
    }

    let mut num = vec![1.0];
    let mut den = vec![1.0];
    for s in &sections {
        let (nb, na) = if s.a2 == 0.0 && s.b2 == 0.0 {
            (vec![s.b0, s.b1], vec![1.0, s.a1])
        } else {
            (vec![s.b0, s.b1, s.b2], vec![1.0, s.a1, s.a2])
        };
        num = convolve(&num, &nb);
        den = convolve(&den, &na);
    }

    Ok(IirFilter {
        order,
        sample_rate_hz,
        cutoff_hz,
        b: num,
        a: den[1..].to_vec(),
        sections,
    })
}

/// Pole `m` of the normalized (unit cutoff) analog prototype.
fn prototype_pole(order: usize, m: usize) -> Complex64 {
    let theta = PI / 2.0 + (2 * m + 1) as f64 * PI / (2 * order) as f64;
    Complex64::from_polar(1.0, theta)
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Squared magnitude of the order-`order` analog prototype at `omega / omega_c`.
pub fn analog_prototype_gain_sq(order: usize, ratio: f64) -> f64 {
    1.0 / (1.0 + ratio.powi(2 * order as i32))
}

impl IirFilter {
    /// Cutoff as a digital angular frequency in rad/sample.
    pub fn cutoff_omega(&self) -> f64 {
        2.0 * PI * self.cutoff_hz / self.sample_rate_hz
    }

    /// Poles of the realized cascade.
    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(Biquad::poles).collect()
    }

    pub fn pole_magnitudes(&self) -> Vec<f64> {
        self.poles().iter().map(|p| p.norm()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.pole_magnitudes().iter().all(|&m| m < 1.0)
    }

    /// Response of the cascade at `omega` rad/sample.
    pub fn sections_response(&self, omega: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -omega);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(zinv))
    }

    /// Response of the normalized analog prototype at `j * ratio`, computed
    /// from its pole positions.
    pub fn analog_prototype_response(&self, ratio: f64) -> Complex64 {
        let s = Complex64::new(0.0, ratio);
        (0..self.order)
            .map(|m| prototype_pole(self.order, m))
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (-p) / (s - p))
    }

    /// Coefficient and pole table for design reports.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "butterworth low-pass  order={}  cutoff_hz={}  sample_rate_hz={}",
            self.order, self.cutoff_hz, self.sample_rate_hz
        );
        let _ = writeln!(s, "{:>4}  {:>20}  {:>20}", "k", "b_k", "a_k");
        for (i, b) in self.b.iter().enumerate() {
            let a = if i == 0 { 1.0 } else { self.a[i - 1] };
            let _ = writeln!(s, "{i:>4}  {b:>20.11e}  {a:>20.11e}");
        }
        let _ = writeln!(s, "pole magnitudes:");
        for (i, p) in self.poles().iter().enumerate() {
            let _ = writeln!(
                s,
                "{i:>4}  {:>20.11e}  ({:+.11e} {:+.11e}j)",
                p.norm(),
                p.re,
                p.im
            );
        }
        let dc = self.sections_response(0.0).norm();
        let fc = self.sections_response(self.cutoff_omega()).norm();
        let _ = writeln!(s, "|H(0)| = {dc:.12}  |H(fc)| = {fc:.12}");
        s
    }
}

/// Evaluates the rational transfer function from `b` and `a` at
/// `omega` rad/sample, `0 <= omega < pi`.
pub fn frequency_response(filter: &IirFilter, omega: f64) -> Result<Complex64, DspError> {
    if !(0.0..PI).contains(&omega) {
        return Err(DspError::Domain { omega });
    }
    let zinv = Complex64::from_polar(1.0, -omega);
    let poly = |coeffs: &[f64]| {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zinv + c)
    };
    let num = poly(&filter.b);
    let den = poly(&filter.a) * zinv + 1.0;
    Ok(num / den)
}

fn check_finite(x: &[f64]) -> Result<(), DspError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(DspError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Runs the filter from rest over `x` through the cascaded sections
/// (transposed direct form II).
pub fn apply_iir(filter: &IirFilter, x: &[f64]) -> Result<Vec<f64>, DspError> {
    check_finite(x)?;
    let mut y = x.to_vec();
    for s in &filter.sections {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b0 * input + s1;
            s1 = s.b1 * input - s.a1 * out + s2;
            s2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    Ok(y)
}

/// The single high-order difference equation
/// `y[n] = sum b_k x[n-k] - sum a_k y[n-k]`, from rest.
pub fn apply_direct_form(filter: &IirFilter, x: &[f64]) -> Result<Vec<f64>, DspError> {
    check_finite(x)?;
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let mut acc = 0.0;
        for (k, &b) in filter.b.iter().enumerate().take(n + 1) {
            acc += b * x[n - k];
        }
        for (k, &a) in filter.a.iter().enumerate().take(n) {
            acc -= a * y[n - k - 1];
        }
        y[n] = acc;
    }
    Ok(y)
}
