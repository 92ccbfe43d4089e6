use std::path::Path;

use super::tensor::{quantize_tensor, ActQuant, QuantTensor, RangeObserver};
use super::QuantError;
use crate::gru::io::{
    read_container, write_container, Container, ModelKind, StoredTensor, TensorData,
};
use crate::gru::{GruConfig, GruNetwork};
use crate::matrix::Matrix;
use crate::real::sigmoid;

/// Windows whose FP32 activations fix the activation ranges.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationSet<'a> {
    windows: &'a [Matrix<f32>],
}

impl<'a> CalibrationSet<'a> {
    pub fn new(windows: &'a [Matrix<f32>]) -> Result<Self, QuantError> {
        if windows.is_empty() {
            return Err(QuantError::EmptyCalibration);
        }
        Ok(Self { windows })
    }

    pub fn windows(&self) -> &'a [Matrix<f32>] {
        self.windows
    }
}

/// Activation quantizers of one recurrent layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRanges {
    /// Layer input sequence.
    pub x: ActQuant,
    /// Previous hidden state.
    pub h: ActQuant,
    /// Reset-gated state `r * h` fed to the candidate.
    pub rh: ActQuant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub layers: Vec<LayerRanges>,
    /// Top-layer final state read by both heads.
    pub head: ActQuant,
}

/// One gate's weights with the zero-point correction terms precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGate {
    pub w: QuantTensor,
    pub b: Vec<f32>,
    /// Per-row sums of the integer weights over the state columns.
    rowsum_h: Vec<i32>,
    /// Per-row sums over the input columns.
    rowsum_x: Vec<i32>,
    /// The state and input columns of `w` widened to `i16` for the kernels.
    wide_h: Vec<i16>,
    wide_x: Vec<i16>,
}

impl QuantGate {
    fn new(w: QuantTensor, b: Vec<f32>, hidden: usize) -> Self {
        let cols = w.shape.1;
        let rows = w.shape.0;
        let part = |range: std::ops::Range<usize>| -> (Vec<i32>, Vec<i16>) {
            let sums = (0..rows)
                .map(|r| w.row(r)[range.clone()].iter().map(|&v| v as i32).sum())
                .collect();
            let wide = (0..rows)
                .flat_map(|r| w.row(r)[range.clone()].iter().map(|&v| v as i16))
                .collect();
            (sums, wide)
        };
        let (rowsum_h, wide_h) = part(0..hidden);
        let (rowsum_x, wide_x) = part(hidden..cols);
        Self {
            w,
            b,
            rowsum_h,
            rowsum_x,
            wide_h,
            wide_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    pub z: QuantGate,
    pub r: QuantGate,
    pub h: QuantGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantHead {
    pub w: QuantTensor,
    pub b: Vec<f32>,
    rowsum: Vec<i32>,
    wide: Vec<i16>,
}

impl QuantHead {
    fn new(w: QuantTensor, b: Vec<f32>) -> Self {
        let rowsum = (0..w.shape.0)
            .map(|r| w.row(r).iter().map(|&v| v as i32).sum())
            .collect();
        let wide = w.values.iter().map(|&v| v as i16).collect();
        Self { w, b, rowsum, wide }
    }

    fn apply(&self, q: &[i16], act: ActQuant) -> Vec<f32> {
        let cols = self.w.shape.1;
        (0..self.w.shape.0)
            .map(|i| {
                let acc = dot_i16(&self.wide[i * cols..(i + 1) * cols], q)
                    - act.zero_point * self.rowsum[i];
                acc as f32 * (self.w.scale * act.scale) + self.b[i]
            })
            .collect()
    }
}

/// Integer dot product of two INT8-valued vectors held as `i16`. Each
/// product is at most 2^14, so the `i32` sums cannot overflow for any layer
/// width below 2^17; wrapping ops keep the loop free of overflow checks.
#[inline]
fn dot_i16(a: &[i16], b: &[i16]) -> i32 {
    const LANES: usize = 16;
    let mut acc = [0i32; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] = acc[k].wrapping_add((x[k] as i32).wrapping_mul(y[k] as i32));
        }
    }
    let tail = ta.iter().zip(tb).fold(0i32, |s, (&x, &y)| {
        s.wrapping_add((x as i32).wrapping_mul(y as i32))
    });
    acc.iter().fold(tail, |s, &v| s.wrapping_add(v))
}

fn quantize_wide(act: ActQuant, xs: &[f32], out: &mut [i16]) {
    for (o, &v) in out.iter_mut().zip(xs) {
        *o = act.quantize(v) as i16;
    }
}

/// INT8 counterpart of [`GruNetwork`]: symmetric per-tensor weights, `f32`
/// biases and, once calibrated, asymmetric per-tensor activation ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGruNetwork {
    config: GruConfig,
    seed: u64,
    layers: Vec<QuantLayer>,
    activity: QuantHead,
    presence: QuantHead,
    calibration: Option<Calibration>,
}

/// Quantizes every weight tensor. The result cannot run until
/// [`QuantGruNetwork::calibrate`] has been called.
pub fn quantize_network(net: &GruNetwork<f32>) -> Result<QuantGruNetwork, QuantError> {
    let cfg = *net.config();
    let p = net.params();
    let hid = cfg.hidden_size;
    let gate = |w: &Matrix<f32>, b: &[f32]| -> Result<QuantGate, QuantError> {
        Ok(QuantGate::new(
            quantize_tensor(w.as_slice(), w.shape())?,
            b.to_vec(),
            hid,
        ))
    };
    let layers = p
        .layers
        .iter()
        .map(|l| {
            Ok(QuantLayer {
                z: gate(&l.wz, &l.bz)?,
                r: gate(&l.wr, &l.br)?,
                h: gate(&l.wh, &l.bh)?,
            })
        })
        .collect::<Result<Vec<_>, QuantError>>()?;
    let head = |w: &Matrix<f32>, b: &[f32]| -> Result<QuantHead, QuantError> {
        Ok(QuantHead::new(
            quantize_tensor(w.as_slice(), w.shape())?,
            b.to_vec(),
        ))
    };
    Ok(QuantGruNetwork {
        config: cfg,
        seed: net.seed(),
        layers,
        activity: head(&p.activity.w, &p.activity.b)?,
        presence: head(&p.presence.w, &p.presence.b)?,
        calibration: None,
    })
}

impl QuantGruNetwork {
    pub fn config(&self) -> &GruConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[QuantLayer] {
        &self.layers
    }

    pub fn heads(&self) -> (&QuantHead, &QuantHead) {
        (&self.activity, &self.presence)
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibration.is_some()
    }

    /// Records min/max of every quantized activation while `net` runs over the
    /// calibration windows.
    pub fn calibrate(
        &mut self,
        net: &GruNetwork<f32>,
        set: &CalibrationSet<'_>,
    ) -> Result<(), QuantError> {
        if net.config() != &self.config {
            return Err(QuantError::Shape(
                "calibration network has a different architecture".into(),
            ));
        }
        let n = self.config.num_layers;
        let mut obs = vec![[RangeObserver::default(); 3]; n];
        let mut head = RangeObserver::default();
        let hid = self.config.hidden_size;
        let mut rh = vec![0.0f32; hid];
        for w in set.windows() {
            let out = net.forward(w)?;
            for (o, lt) in obs.iter_mut().zip(&out.trace.layers) {
                o[0].observe(lt.inputs.as_slice());
                o[1].observe(lt.h.as_slice());
                for t in 1..lt.h.rows() {
                    let (r, h_prev) = (lt.r.row(t), lt.h.row(t - 1));
                    for i in 0..hid {
                        rh[i] = r[i] * h_prev[i];
                    }
                    o[2].observe(&rh);
                }
            }
            let top = out.trace.layers.last().expect("validated depth");
            head.observe(top.h.row(top.h.rows() - 1));
        }
        self.calibration = Some(Calibration {
            layers: obs
                .into_iter()
                .map(|[x, h, rh]| LayerRanges {
                    x: x.finish(),
                    h: h.finish(),
                    rh: rh.finish(),
                })
                .collect(),
            head: head.finish(),
        });
        Ok(())
    }

    /// `(activity logits, presence logits)` with every matrix product in
    /// `i8 x i8 -> i32` and the nonlinearities in `f32`.
    pub fn quant_forward(&self, window: &Matrix<f32>) -> Result<(Vec<f32>, Vec<f32>), QuantError> {
        let cal = self.calibration.as_ref().ok_or(QuantError::Uncalibrated)?;
        let cfg = &self.config;
        if window.cols() != cfg.input_size || window.rows() == 0 {
            return Err(QuantError::Shape(format!(
                "window is {}x{}, expected Tx{}",
                window.rows(),
                window.cols(),
                cfg.input_size
            )));
        }
        let steps = window.rows();
        let hid = cfg.hidden_size;
        let mut seq = window.clone();
        let mut qh = vec![0i16; hid];
        let mut z = vec![0.0f32; hid];
        let mut rh = vec![0.0f32; hid];
        for (layer, ranges) in self.layers.iter().zip(&cal.layers) {
            let inp = seq.cols();
            // Input-side contributions do not depend on the recurrence.
            let mut qx = vec![0i16; inp];
            let mut x_part = Matrix::<f32>::zeros(steps, 3 * hid);
            for t in 0..steps {
                quantize_wide(ranges.x, seq.row(t), &mut qx);
                let row = x_part.row_mut(t);
                for (g, gate) in [&layer.z, &layer.r, &layer.h].into_iter().enumerate() {
                    let s = gate.w.scale * ranges.x.scale;
                    for i in 0..hid {
                        let acc = dot_i16(&gate.wide_x[i * inp..(i + 1) * inp], &qx)
                            - ranges.x.zero_point * gate.rowsum_x[i];
                        row[g * hid + i] = acc as f32 * s + gate.b[i];
                    }
                }
            }
            let mut out = Matrix::<f32>::zeros(steps, hid);
            let mut h_prev = vec![0.0f32; hid];
            let recur = |gate: &QuantGate, q: &[i16], act: ActQuant, i: usize| -> f32 {
                let acc = dot_i16(&gate.wide_h[i * hid..(i + 1) * hid], q)
                    - act.zero_point * gate.rowsum_h[i];
                acc as f32 * (gate.w.scale * act.scale)
            };
            for t in 0..steps {
                let xp = x_part.row(t);
                quantize_wide(ranges.h, &h_prev, &mut qh);
                for i in 0..hid {
                    z[i] = sigmoid(recur(&layer.z, &qh, ranges.h, i) + xp[i]);
                    let r = sigmoid(recur(&layer.r, &qh, ranges.h, i) + xp[hid + i]);
                    rh[i] = r * h_prev[i];
                }
                quantize_wide(ranges.rh, &rh, &mut qh);
                let h = out.row_mut(t);
                for i in 0..hid {
                    let cand = (recur(&layer.h, &qh, ranges.rh, i) + xp[2 * hid + i]).tanh();
                    h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * cand;
                }
                h_prev.copy_from_slice(h);
            }
            seq = out;
        }
        quantize_wide(cal.head, seq.row(steps - 1), &mut qh);
        Ok((
            self.activity.apply(&qh, cal.head),
            self.presence.apply(&qh, cal.head),
        ))
    }

    /// Bytes of quantized weight payload, scales and zero points included.
    pub fn weight_payload_bytes(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| [&l.z.w, &l.r.w, &l.h.w])
            .chain([&self.activity.w, &self.presence.w])
            .map(QuantTensor::payload_bytes)
            .sum()
    }

    fn to_container(&self) -> Result<Container, QuantError> {
        let cal = self.calibration.as_ref().ok_or(QuantError::Uncalibrated)?;
        let mut tensors = Vec::new();
        let qt = |name: String, w: &QuantTensor| StoredTensor {
            name,
            shape: vec![w.shape.0, w.shape.1],
            data: TensorData::I8 {
                scale: w.scale,
                zero_point: w.zero_point,
                values: w.values.clone(),
            },
        };
        let act = |name: String, a: ActQuant| {
            StoredTensor::f32(name, vec![2], vec![a.scale, a.zero_point as f32])
        };
        for (l, (layer, r)) in self.layers.iter().zip(&cal.layers).enumerate() {
            for (g, gate) in [("z", &layer.z), ("r", &layer.r), ("h", &layer.h)] {
                tensors.push(qt(format!("gru.{l}.w{g}"), &gate.w));
            }
            for (g, gate) in [("z", &layer.z), ("r", &layer.r), ("h", &layer.h)] {
                tensors.push(StoredTensor::f32(
                    format!("gru.{l}.b{g}"),
                    vec![gate.b.len()],
                    gate.b.clone(),
                ));
            }
            tensors.push(act(format!("act.{l}.x"), r.x));
            tensors.push(act(format!("act.{l}.h"), r.h));
            tensors.push(act(format!("act.{l}.rh"), r.rh));
        }
        for (name, head) in [("activity", &self.activity), ("presence", &self.presence)] {
            tensors.push(qt(format!("head.{name}.w"), &head.w));
            tensors.push(StoredTensor::f32(
                format!("head.{name}.b"),
                vec![head.b.len()],
                head.b.clone(),
            ));
        }
        tensors.push(act("act.head".into(), cal.head));
        Ok(Container {
            kind: ModelKind::Int8,
            config: self.config,
            seed: self.seed,
            tensors,
        })
    }

    pub(crate) fn from_container(c: &Container) -> Result<Self, QuantError> {
        if c.kind != ModelKind::Int8 {
            return Err(QuantError::Shape("expected an int8 model file".into()));
        }
        let cfg = c.config;
        let hid = cfg.hidden_size;
        let weight = |name: &str, rows: usize, cols: usize| -> Result<QuantTensor, QuantError> {
            let t = c.tensor(name)?;
            match &t.data {
                TensorData::I8 {
                    scale,
                    zero_point,
                    values,
                } if t.shape == [rows, cols] => Ok(QuantTensor {
                    values: values.clone(),
                    scale: *scale,
                    zero_point: *zero_point,
                    shape: (rows, cols),
                }),
                _ => Err(QuantError::Shape(format!(
                    "{name} is not an int8 {rows}x{cols} tensor"
                ))),
            }
        };
        let vector = |name: &str, len: usize| -> Result<Vec<f32>, QuantError> {
            let t = c.tensor(name)?;
            match &t.data {
                TensorData::F32(v) if t.shape == [len] => Ok(v.clone()),
                _ => Err(QuantError::Shape(format!(
                    "{name} is not an f32 vector of {len}"
                ))),
            }
        };
        let act = |name: &str| -> Result<ActQuant, QuantError> {
            let v = vector(name, 2)?;
            Ok(ActQuant {
                scale: v[0],
                zero_point: v[1] as i32,
            })
        };
        let mut layers = Vec::new();
        let mut ranges = Vec::new();
        for l in 0..cfg.num_layers {
            let cols = hid + cfg.layer_input(l);
            let gate = |g: &str| -> Result<QuantGate, QuantError> {
                Ok(QuantGate::new(
                    weight(&format!("gru.{l}.w{g}"), hid, cols)?,
                    vector(&format!("gru.{l}.b{g}"), hid)?,
                    hid,
                ))
            };
            layers.push(QuantLayer {
                z: gate("z")?,
                r: gate("r")?,
                h: gate("h")?,
            });
            ranges.push(LayerRanges {
                x: act(&format!("act.{l}.x"))?,
                h: act(&format!("act.{l}.h"))?,
                rh: act(&format!("act.{l}.rh"))?,
            });
        }
        let head = |name: &str, n: usize| -> Result<QuantHead, QuantError> {
            Ok(QuantHead::new(
                weight(&format!("head.{name}.w"), n, hid)?,
                vector(&format!("head.{name}.b"), n)?,
            ))
        };
        Ok(Self {
            config: cfg,
            seed: c.seed,
            layers,
            activity: head("activity", cfg.activity_classes)?,
            presence: head("presence", cfg.presence_classes)?,
            calibration: Some(Calibration {
                layers: ranges,
                head: act("act.head")?,
            }),
        })
    }

    /// Writes a calibrated network as an INT8 container plus manifest.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QuantError> {
        write_container(path, &self.to_container()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuantError> {
        Self::from_container(&read_container(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GruConfig {
        GruConfig {
            input_size: 5,
            hidden_size: 6,
            num_layers: 2,
            activity_classes: 7,
            presence_classes: 2,
        }
    }

    fn windows(n: usize) -> Vec<Matrix<f32>> {
        (0..n)
            .map(|k| {
                let data = (0..30 * 5)
                    .map(|i| (((i * (k + 2)) as f32) * 0.17).sin() * 0.5 + 0.5)
                    .collect();
                Matrix::from_vec(30, 5, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn uncalibrated_is_a_state_error() {
        let net = GruNetwork::<f32>::init(cfg(), 1).unwrap();
        let q = quantize_network(&net).unwrap();
        let err = q.quant_forward(&windows(1)[0]).unwrap_err();
        assert!(matches!(err, QuantError::Uncalibrated));
        assert_eq!(err.class(), "state");
        assert!(CalibrationSet::new(&[]).is_err());
    }

    #[test]
    fn zero_weights_give_head_biases() {
        let mut net = GruNetwork::<f32>::init(cfg(), 2).unwrap();
        for t in net.params_mut().tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        net.params_mut().activity.b[3] = 0.75;
        net.params_mut().presence.b[1] = -0.5;
        let w = windows(2);
        let mut q = quantize_network(&net).unwrap();
        q.calibrate(&net, &CalibrationSet::new(&w).unwrap())
            .unwrap();
        let zero = Matrix::zeros(10, 5);
        let (a, p) = q.quant_forward(&zero).unwrap();
        assert_eq!(a, net.params().activity.b);
        assert_eq!(p, net.params().presence.b);
    }

    #[test]
    fn close_to_float_network() {
        let net = GruNetwork::<f32>::init(cfg(), 3).unwrap();
        let w = windows(8);
        let mut q = quantize_network(&net).unwrap();
        q.calibrate(&net, &CalibrationSet::new(&w).unwrap())
            .unwrap();
        for win in &w {
            let (fa, fp) = net.logits(win).unwrap();
            let (qa, qp) = q.quant_forward(win).unwrap();
            for (x, y) in fa.iter().chain(&fp).zip(qa.iter().chain(&qp)) {
                assert!((x - y).abs() < 0.05, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let net = GruNetwork::<f32>::init(cfg(), 4).unwrap();
        let w = windows(3);
        let mut q = quantize_network(&net).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.w");
        assert!(matches!(q.save(&path), Err(QuantError::Uncalibrated)));
        q.calibrate(&net, &CalibrationSet::new(&w).unwrap())
            .unwrap();
        q.save(&path).unwrap();
        let back = QuantGruNetwork::load(&path).unwrap();
        assert_eq!(back, q);
        assert_eq!(
            back.quant_forward(&w[0]).unwrap(),
            q.quant_forward(&w[0]).unwrap()
        );
    }

    #[test]
    fn payload_is_a_quarter() {
        let net = GruNetwork::<f32>::init(GruConfig::default(), 5).unwrap();
        let q = quantize_network(&net).unwrap();
        let layers = net.config().num_layers;
        let fp32: usize = net
            .params()
            .tensors()
            .iter()
            .enumerate()
            .filter(|(i, _)| crate::gru::NetParams::<f32>::is_weight(*i, layers))
            .map(|(_, t)| 4 * t.1.len())
            .sum();
        let ratio = q.weight_payload_bytes() as f64 / fp32 as f64;
        assert!((ratio - 0.25).abs() < 0.02, "{ratio}");
    }
}
