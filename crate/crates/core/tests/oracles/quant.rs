use csi_har::quant::{ActQuant, QuantGruNetwork, QuantTensor};
use csi_har::Matrix;

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Quantize-then-dequantize in f64 with the stored scale and zero point.
pub fn fake_quant(v: f64, a: ActQuant) -> f64 {
    let s = a.scale as f64;
    let zp = a.zero_point as f64;
    let q = ((v / s).round() + zp).clamp(-128.0, 127.0);
    (q - zp) * s
}

fn dequant(t: &QuantTensor, i: usize, j: usize) -> f64 {
    t.row(i)[j] as f64 * t.scale as f64
}

/// Float forward pass over dequantized weights with every matrix-product
/// input passed through [`fake_quant`].
pub fn forward(q: &QuantGruNetwork, window: &Matrix<f32>) -> (Vec<f64>, Vec<f64>) {
    let cal = q.calibration().expect("calibrated network");
    let steps = window.rows();
    let mut seq: Vec<Vec<f64>> = (0..steps)
        .map(|t| window.row(t).iter().map(|&v| v as f64).collect())
        .collect();
    for (layer, ranges) in q.layers().iter().zip(&cal.layers) {
        let hid = layer.z.b.len();
        let mut h = vec![0.0; hid];
        let mut out = Vec::with_capacity(steps);
        for x in &seq {
            let xq: Vec<f64> = x.iter().map(|&v| fake_quant(v, ranges.x)).collect();
            let hq: Vec<f64> = h.iter().map(|&v| fake_quant(v, ranges.h)).collect();
            let pre = |w: &QuantTensor, b: &[f32], i: usize, hv: &[f64]| -> f64 {
                let mut s = b[i] as f64;
                for j in 0..hid {
                    s += dequant(w, i, j) * hv[j];
                }
                for j in 0..xq.len() {
                    s += dequant(w, i, hid + j) * xq[j];
                }
                s
            };
            let z: Vec<f64> = (0..hid)
                .map(|i| sig(pre(&layer.z.w, &layer.z.b, i, &hq)))
                .collect();
            let rh: Vec<f64> = (0..hid)
                .map(|i| sig(pre(&layer.r.w, &layer.r.b, i, &hq)) * h[i])
                .map(|v| fake_quant(v, ranges.rh))
                .collect();
            h = (0..hid)
                .map(|i| (1.0 - z[i]) * h[i] + z[i] * pre(&layer.h.w, &layer.h.b, i, &rh).tanh())
                .collect();
            out.push(h.clone());
        }
        seq = out;
    }
    let last: Vec<f64> = seq
        .last()
        .expect("non-empty")
        .iter()
        .map(|&v| fake_quant(v, cal.head))
        .collect();
    let (act, pres) = q.heads();
    let head = |w: &QuantTensor, b: &[f32]| -> Vec<f64> {
        (0..b.len())
            .map(|i| {
                b[i] as f64
                    + (0..last.len())
                        .map(|j| dequant(w, i, j) * last[j])
                        .sum::<f64>()
            })
            .collect()
    };
    (head(&act.w, &act.b), head(&pres.w, &pres.b))
}
