use super::spline::CubicSpline;
use super::DspError;

/// Shortest series that can be decomposed.
pub const MIN_EMD_LEN: usize = 8;
/// Extrema mirrored beyond each end before splining the envelopes.
const MIRRORED_EXTREMA: usize = 2;

/// Sifting stop rule: Cauchy-type standard deviation between successive
/// sifts below `sd_threshold`, capped at `max_iters` sifts per IMF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftConfig {
    pub sd_threshold: f64,
    pub max_iters: usize,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            sd_threshold: 0.2,
            max_iters: 50,
        }
    }
}

/// IMFs ordered highest frequency first, plus the residual trend.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdDecomposition {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub source_len: usize,
}

impl EmdDecomposition {
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Default)]
struct Extrema {
    max_pos: Vec<f64>,
    max_val: Vec<f64>,
    min_pos: Vec<f64>,
    min_val: Vec<f64>,
}

/// Interior local extrema. A flat run counts once, located at its centre.
fn find_extrema(h: &[f64]) -> Extrema {
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in h.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == v => r.1 = i,
            _ => runs.push((i, i, v)),
        }
    }
    let mut ext = Extrema::default();
    for w in runs.windows(3) {
        let (prev, (s, e, v), next) = (w[0].2, w[1], w[2].2);
        let pos = (s + e) as f64 / 2.0;
        if v > prev && v > next {
            ext.max_pos.push(pos);
            ext.max_val.push(v);
        } else if v < prev && v < next {
            ext.min_pos.push(pos);
            ext.min_val.push(v);
        }
    }
    ext
}

pub fn count_extrema(h: &[f64]) -> usize {
    let e = find_extrema(h);
    e.max_pos.len() + e.min_pos.len()
}

pub fn count_zero_crossings(h: &[f64]) -> usize {
    let mut prev: Option<bool> = None;
    let mut n = 0;
    for &v in h {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if prev.is_some_and(|p| p != pos) {
            n += 1;
        }
        prev = Some(pos);
    }
    n
}

/// Extrema and zero-crossing counts differ by at most one.
pub fn is_imf(h: &[f64]) -> bool {
    count_extrema(h).abs_diff(count_zero_crossings(h)) <= 1
}

/// Knots for one envelope with the outermost extrema reflected about the
/// first and last samples.
fn mirrored_knots(pos: &[f64], val: &[f64], len: usize) -> (Vec<f64>, Vec<f64>) {
    let k = MIRRORED_EXTREMA.min(pos.len());
    let end = (len - 1) as f64;
    let mut xs = Vec::with_capacity(pos.len() + 2 * k);
    let mut ys = Vec::with_capacity(pos.len() + 2 * k);
    for i in (0..k).rev() {
        xs.push(-pos[i]);
        ys.push(val[i]);
    }
    xs.extend_from_slice(pos);
    ys.extend_from_slice(val);
    for i in (pos.len() - k..pos.len()).rev() {
        xs.push(2.0 * end - pos[i]);
        ys.push(val[i]);
    }
    (xs, ys)
}

fn has_enough_extrema(e: &Extrema) -> bool {
    e.max_pos.len() >= 2 && e.min_pos.len() >= 2
}

/// Mean of the upper and lower cubic-spline envelopes.
fn envelope_mean(h: &[f64]) -> Option<Vec<f64>> {
    let e = find_extrema(h);
    if !has_enough_extrema(&e) {
        return None;
    }
    let (ux, uy) = mirrored_knots(&e.max_pos, &e.max_val, h.len());
    let (lx, ly) = mirrored_knots(&e.min_pos, &e.min_val, h.len());
    let upper = CubicSpline::new(ux, uy)?.eval_grid(h.len());
    let lower = CubicSpline::new(lx, ly)?.eval_grid(h.len());
    Some(
        upper
            .iter()
            .zip(&lower)
            .map(|(u, l)| 0.5 * (u + l))
            .collect(),
    )
}

/// Empirical mode decomposition by repeated sifting.
///
/// A sifted candidate is accepted as an IMF only once it meets the
/// extrema/zero-crossing condition; if the sift cap is reached without that,
/// decomposition stops and the remainder stays in the residual. Series that
/// are too short or lack two maxima and two minima yield no IMFs.
pub fn emd_decompose(
    x: &[f64],
    max_imfs: usize,
    cfg: &SiftConfig,
) -> Result<EmdDecomposition, DspError> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(DspError::NonFinite(i));
    }
    let mut residual = x.to_vec();
    let mut imfs = Vec::new();
    if x.len() >= MIN_EMD_LEN {
        while imfs.len() < max_imfs && has_enough_extrema(&find_extrema(&residual)) {
            let Some(imf) = sift(&residual, cfg) else {
                break;
            };
            for (r, v) in residual.iter_mut().zip(&imf) {
                *r -= v;
            }
            imfs.push(imf);
        }
    }
    Ok(EmdDecomposition {
        imfs,
        residual,
        source_len: x.len(),
    })
}

fn sift(signal: &[f64], cfg: &SiftConfig) -> Option<Vec<f64>> {
    let mut h = signal.to_vec();
    for _ in 0..cfg.max_iters {
        let Some(mean) = envelope_mean(&h) else {
            break;
        };
        let energy: f64 = h.iter().map(|v| v * v).sum();
        let change: f64 = mean.iter().map(|m| m * m).sum();
        for (v, m) in h.iter_mut().zip(&mean) {
            *v -= m;
        }
        let sd = if energy > 0.0 { change / energy } else { 0.0 };
        if sd < cfg.sd_threshold && is_imf(&h) {
            return Some(h);
        }
    }
    is_imf(&h).then_some(h)
}

/// Sum of IMFs `keep_from_k..=n` (1-based) plus the residual.
pub fn emd_remove_high_freq(
    d: &EmdDecomposition,
    keep_from_k: usize,
) -> Result<Vec<f64>, DspError> {
    let max = d.imfs.len() + 1;
    if keep_from_k == 0 || keep_from_k > max {
        return Err(DspError::ImfIndex {
            k: keep_from_k,
            max,
        });
    }
    let mut out = d.residual.clone();
    for imf in &d.imfs[keep_from_k - 1..] {
        for (o, v) in out.iter_mut().zip(imf) {
            *o += v;
        }
    }
    Ok(out)
}
