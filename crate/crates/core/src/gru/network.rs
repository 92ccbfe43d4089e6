use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GruError;
use crate::matrix::Matrix;
use crate::real::{dot, sigmoid, Real};

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GruConfig {
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub activity_classes: usize,
    pub presence_classes: usize,
}

impl Default for GruConfig {
    fn default() -> Self {
        Self {
            input_size: 49,
            hidden_size: 64,
            num_layers: 3,
            activity_classes: 7,
            presence_classes: 2,
        }
    }
}

impl GruConfig {
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }

    /// Closed-form scalar parameter count.
    pub fn param_count(&self) -> usize {
        let h = self.hidden_size;
        let layers: usize = (0..self.num_layers)
            .map(|l| 3 * (h * (h + self.layer_input(l)) + h))
            .sum();
        layers
            + (h * self.activity_classes + self.activity_classes)
            + (h * self.presence_classes + self.presence_classes)
    }

    fn validate(&self) -> Result<(), GruError> {
        if self.hidden_size == 0
            || self.input_size == 0
            || self.activity_classes == 0
            || self.presence_classes == 0
        {
            return Err(GruError::Config(format!(
                "degenerate network shape {self:?}"
            )));
        }
        Ok(())
    }
}

/// Gate weights of one layer; every matrix is `hidden x (hidden + input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams<T> {
    pub wz: Matrix<T>,
    pub wr: Matrix<T>,
    pub wh: Matrix<T>,
    pub bz: Vec<T>,
    pub br: Vec<T>,
    pub bh: Vec<T>,
}

impl<T: Real> GruLayerParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            wz: Matrix::zeros(hidden, hidden + input),
            wr: Matrix::zeros(hidden, hidden + input),
            wh: Matrix::zeros(hidden, hidden + input),
            bz: vec![T::zero(); hidden],
            br: vec![T::zero(); hidden],
            bh: vec![T::zero(); hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.bz.len()
    }

    pub fn input(&self) -> usize {
        self.wz.cols() - self.hidden()
    }

    fn check(&self) -> Result<(), GruError> {
        let h = self.hidden();
        let cols = self.wz.cols();
        let ok = [&self.wz, &self.wr, &self.wh]
            .iter()
            .all(|m| m.rows() == h && m.cols() == cols && cols >= h)
            && self.br.len() == h
            && self.bh.len() == h;
        if ok {
            Ok(())
        } else {
            Err(GruError::Shape(
                "inconsistent layer parameter shapes".into(),
            ))
        }
    }
}

/// Affine map `w * x + b` with `w` of shape `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            w: Matrix::zeros(outputs, inputs),
            b: vec![T::zero(); outputs],
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.b
            .iter()
            .enumerate()
            .map(|(i, &b)| dot(self.w.row(i), x) + b)
            .collect()
    }
}

/// All trainable tensors. Also used as the gradient and optimizer-moment
/// container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub layers: Vec<GruLayerParams<T>>,
    pub activity: Linear<T>,
    pub presence: Linear<T>,
}

const LAYER_TENSORS: [&str; 6] = ["wz", "wr", "wh", "bz", "br", "bh"];

impl<T: Real> NetParams<T> {
    pub fn zeros(cfg: &GruConfig) -> Self {
        Self {
            layers: (0..cfg.num_layers)
                .map(|l| GruLayerParams::zeros(cfg.hidden_size, cfg.layer_input(l)))
                .collect(),
            activity: Linear::zeros(cfg.activity_classes, cfg.hidden_size),
            presence: Linear::zeros(cfg.presence_classes, cfg.hidden_size),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let map_m = |m: &Matrix<T>| Matrix::zeros(m.rows(), m.cols());
        let map_v = |v: &Vec<T>| vec![T::zero(); v.len()];
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| GruLayerParams {
                    wz: map_m(&l.wz),
                    wr: map_m(&l.wr),
                    wh: map_m(&l.wh),
                    bz: map_v(&l.bz),
                    br: map_v(&l.br),
                    bh: map_v(&l.bh),
                })
                .collect(),
            activity: Linear {
                w: map_m(&self.activity.w),
                b: map_v(&self.activity.b),
            },
            presence: Linear {
                w: map_m(&self.presence.w),
                b: map_v(&self.presence.b),
            },
        }
    }

    /// Tensor names in storage order: `gru.<l>.<wz|wr|wh|bz|br|bh>`, then
    /// `head.activity.{w,b}` and `head.presence.{w,b}`.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.layers.len())
            .flat_map(|l| LAYER_TENSORS.iter().map(move |t| format!("gru.{l}.{t}")))
            .collect();
        for head in ["activity", "presence"] {
            names.push(format!("head.{head}.w"));
            names.push(format!("head.{head}.b"));
        }
        names
    }

    /// `(shape, data)` for every tensor in [`NetParams::tensor_names`] order.
    pub fn tensors(&self) -> Vec<((usize, usize), &[T])> {
        let mut out: Vec<((usize, usize), &[T])> = Vec::new();
        for l in &self.layers {
            for m in [&l.wz, &l.wr, &l.wh] {
                out.push((m.shape(), m.as_slice()));
            }
            for v in [&l.bz, &l.br, &l.bh] {
                out.push(((v.len(), 1), v.as_slice()));
            }
        }
        for head in [&self.activity, &self.presence] {
            out.push((head.w.shape(), head.w.as_slice()));
            out.push(((head.b.len(), 1), head.b.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.wz.as_mut_slice());
            out.push(l.wr.as_mut_slice());
            out.push(l.wh.as_mut_slice());
            out.push(l.bz.as_mut_slice());
            out.push(l.br.as_mut_slice());
            out.push(l.bh.as_mut_slice());
        }
        for head in [&mut self.activity, &mut self.presence] {
            out.push(head.w.as_mut_slice());
            out.push(head.b.as_mut_slice());
        }
        out
    }

    /// True for weight matrices, false for bias vectors.
    pub fn is_weight(index: usize, layers: usize) -> bool {
        if index < 6 * layers {
            index % 6 < 3
        } else {
            (index - 6 * layers).is_multiple_of(2)
        }
    }

    /// Sum of tensor sizes.
    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, d)| d.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src.1) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= alpha;
            }
        }
    }

    pub fn norm_sq(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, d)| d.iter())
            .fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        let cm = |m: &Matrix<T>| m.map(|v| U::of(v.as_f64()));
        let cv = |v: &Vec<T>| v.iter().map(|x| U::of(x.as_f64())).collect::<Vec<U>>();
        NetParams {
            layers: self
                .layers
                .iter()
                .map(|l| GruLayerParams {
                    wz: cm(&l.wz),
                    wr: cm(&l.wr),
                    wh: cm(&l.wh),
                    bz: cv(&l.bz),
                    br: cv(&l.br),
                    bh: cv(&l.bh),
                })
                .collect(),
            activity: Linear {
                w: cm(&self.activity.w),
                b: cv(&self.activity.b),
            },
            presence: Linear {
                w: cm(&self.presence.w),
                b: cv(&self.presence.b),
            },
        }
    }
}

/// Hidden state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState<T> {
    pub h: Vec<T>,
}

impl<T: Real> GruState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![T::zero(); hidden],
        }
    }
}

/// Gate activations of one cell update.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord<T> {
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub candidate: Vec<T>,
}

/// Per-layer, per-timestep activations recorded for backpropagation.
/// Rows are timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T> {
    pub inputs: Matrix<T>,
    pub z: Matrix<T>,
    pub r: Matrix<T>,
    pub candidate: Matrix<T>,
    pub h: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    pub(crate) version: u64,
    pub layers: Vec<LayerTrace<T>>,
}

impl<T> ForwardTrace<T> {
    /// Number of recorded timesteps.
    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.h.rows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn version(&self) -> u64 {
        self.version
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    pub activity: Vec<T>,
    pub presence: Vec<T>,
    pub trace: ForwardTrace<T>,
}

/// Scratch buffers reused across timesteps.
struct StepBuf<T> {
    cat: Vec<T>,
}

impl<T: Real> StepBuf<T> {
    fn new(len: usize) -> Self {
        Self {
            cat: vec![T::zero(); len],
        }
    }
}

/// One cell update. Writes gates and the new state into the output slices.
#[allow(clippy::too_many_arguments)]
#[inline]
fn step<T: Real>(
    p: &GruLayerParams<T>,
    h_prev: &[T],
    x: &[T],
    buf: &mut StepBuf<T>,
    z: &mut [T],
    r: &mut [T],
    cand: &mut [T],
    h_out: &mut [T],
) {
    let hid = h_prev.len();
    buf.cat[..hid].copy_from_slice(h_prev);
    buf.cat[hid..].copy_from_slice(x);
    for i in 0..hid {
        z[i] = sigmoid(dot(p.wz.row(i), &buf.cat) + p.bz[i]);
        r[i] = sigmoid(dot(p.wr.row(i), &buf.cat) + p.br[i]);
    }
    for i in 0..hid {
        buf.cat[i] = r[i] * h_prev[i];
    }
    for (i, c) in cand.iter_mut().enumerate() {
        *c = (dot(p.wh.row(i), &buf.cat) + p.bh[i]).tanh();
    }
    for i in 0..hid {
        h_out[i] = (T::one() - z[i]) * h_prev[i] + z[i] * cand[i];
    }
}

/// Single GRU cell update.
pub fn cell_forward<T: Real>(
    params: &GruLayerParams<T>,
    h_prev: &GruState<T>,
    x: &[T],
) -> Result<(GruState<T>, GateRecord<T>), GruError> {
    params.check()?;
    let hid = params.hidden();
    if h_prev.h.len() != hid || x.len() != params.input() {
        return Err(GruError::Shape(format!(
            "cell expects h[{hid}] and x[{}], got h[{}] and x[{}]",
            params.input(),
            h_prev.h.len(),
            x.len()
        )));
    }
    let mut buf = StepBuf::new(hid + x.len());
    let mut rec = GateRecord {
        z: vec![T::zero(); hid],
        r: vec![T::zero(); hid],
        candidate: vec![T::zero(); hid],
    };
    let mut h = vec![T::zero(); hid];
    step(
        params,
        &h_prev.h,
        x,
        &mut buf,
        &mut rec.z,
        &mut rec.r,
        &mut rec.candidate,
        &mut h,
    );
    Ok((GruState { h }, rec))
}

/// The classifier: stacked GRU layers plus two linear heads.
///
/// Every parameter change goes through [`GruNetwork::params_mut`], which
/// assigns a new version so stale forward traces can be detected.
#[derive(Debug, Clone, PartialEq)]
pub struct GruNetwork<T> {
    config: GruConfig,
    seed: u64,
    params: NetParams<T>,
    version: u64,
}

impl<T: Real> GruNetwork<T> {
    /// Weights uniform in `+-1/sqrt(hidden)`, biases zero.
    pub fn init(config: GruConfig, seed: u64) -> Result<Self, GruError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.hidden_size as f64).sqrt();
        let mut params = NetParams::zeros(&config);
        let layers = config.num_layers;
        for (i, t) in params.tensors_mut().into_iter().enumerate() {
            if NetParams::<T>::is_weight(i, layers) {
                for v in t {
                    *v = T::of(rng.random_range(-bound..bound));
                }
            }
        }
        Ok(Self {
            config,
            seed,
            params,
            version: fresh_version(),
        })
    }

    pub fn from_params(
        config: GruConfig,
        seed: u64,
        params: NetParams<T>,
    ) -> Result<Self, GruError> {
        config.validate()?;
        let expected = NetParams::<T>::zeros(&config);
        let shapes_ok = expected.layers.len() == params.layers.len()
            && expected
                .tensors()
                .iter()
                .zip(params.tensors())
                .all(|(a, b)| a.0 == b.0);
        if !shapes_ok {
            return Err(GruError::Shape(
                "parameter shapes do not match the configuration".into(),
            ));
        }
        Ok(Self {
            config,
            seed,
            params,
            version: fresh_version(),
        })
    }

    pub fn config(&self) -> &GruConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &NetParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetParams<T> {
        self.version = fresh_version();
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Scalar parameter count by enumerating the tensors.
    pub fn count_params(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Real>(&self) -> GruNetwork<U> {
        GruNetwork {
            config: self.config,
            seed: self.seed,
            params: self.params.cast(),
            version: fresh_version(),
        }
    }

    fn check_window(&self, window: &Matrix<T>) -> Result<(), GruError> {
        if self.config.num_layers == 0 {
            return Err(GruError::Config("network has no recurrent layers".into()));
        }
        if window.cols() != self.config.input_size || window.rows() == 0 {
            return Err(GruError::Shape(format!(
                "window is {}x{}, expected Tx{} with T >= 1",
                window.rows(),
                window.cols(),
                self.config.input_size
            )));
        }
        Ok(())
    }

    /// Forward pass over a `timesteps x input_size` window, recording every
    /// activation.
    pub fn forward(&self, window: &Matrix<T>) -> Result<ForwardOutput<T>, GruError> {
        self.check_window(window)?;
        let steps = window.rows();
        let hid = self.config.hidden_size;
        let mut layers = Vec::with_capacity(self.config.num_layers);
        let mut inputs = window.clone();
        for p in &self.params.layers {
            let mut lt = LayerTrace {
                inputs: Matrix::zeros(0, 0),
                z: Matrix::zeros(steps, hid),
                r: Matrix::zeros(steps, hid),
                candidate: Matrix::zeros(steps, hid),
                h: Matrix::zeros(steps, hid),
            };
            let mut buf = StepBuf::new(hid + inputs.cols());
            let mut h_prev = vec![T::zero(); hid];
            for t in 0..steps {
                let mut h = vec![T::zero(); hid];
                step(
                    p,
                    &h_prev,
                    inputs.row(t),
                    &mut buf,
                    lt.z.row_mut(t),
                    lt.r.row_mut(t),
                    lt.candidate.row_mut(t),
                    &mut h,
                );
                lt.h.row_mut(t).copy_from_slice(&h);
                h_prev = h;
            }
            let next = lt.h.clone();
            lt.inputs = std::mem::replace(&mut inputs, next);
            layers.push(lt);
        }
        let last = inputs.row(steps - 1);
        Ok(ForwardOutput {
            activity: self.params.activity.apply(last),
            presence: self.params.presence.apply(last),
            trace: ForwardTrace {
                version: self.version,
                layers,
            },
        })
    }

    /// Forward pass without a trace: `(activity logits, presence logits)`.
    pub fn logits(&self, window: &Matrix<T>) -> Result<(Vec<T>, Vec<T>), GruError> {
        self.check_window(window)?;
        let hid = self.config.hidden_size;
        let mut seq = window.clone();
        let mut z = vec![T::zero(); hid];
        let mut r = vec![T::zero(); hid];
        let mut c = vec![T::zero(); hid];
        for p in &self.params.layers {
            let mut out = Matrix::zeros(seq.rows(), hid);
            let mut buf = StepBuf::new(hid + seq.cols());
            let mut h_prev = vec![T::zero(); hid];
            let mut h = vec![T::zero(); hid];
            for t in 0..seq.rows() {
                step(
                    p,
                    &h_prev,
                    seq.row(t),
                    &mut buf,
                    &mut z,
                    &mut r,
                    &mut c,
                    &mut h,
                );
                out.row_mut(t).copy_from_slice(&h);
                std::mem::swap(&mut h_prev, &mut h);
            }
            seq = out;
        }
        let last = seq.row(seq.rows() - 1);
        Ok((
            self.params.activity.apply(last),
            self.params.presence.apply(last),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_layer(hidden: usize, input: usize) -> GruLayerParams<f64> {
        GruLayerParams::zeros(hidden, input)
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let p = zero_layer(1, 3);
        let mut s = GruState { h: vec![1.0] };
        for t in 1..=10 {
            let (next, rec) = cell_forward(&p, &s, &[0.3, -2.0, 7.0]).unwrap();
            assert_eq!(rec.z, vec![0.5]);
            assert_eq!(rec.r, vec![0.5]);
            assert_eq!(rec.candidate, vec![0.0]);
            s = next;
            assert_eq!(s.h[0], 0.5f64.powi(t));
        }
    }

    #[test]
    fn zero_state_is_fixed_point_of_zero_input() {
        let mut p = zero_layer(4, 2);
        for (i, v) in p.wz.as_mut_slice().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        for (i, v) in p.wh.as_mut_slice().iter_mut().enumerate() {
            *v = (i as f64 * 0.11).cos();
        }
        let (s, _) = cell_forward(&p, &GruState::zeros(4), &[0.0, 0.0]).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
    }

    #[test]
    fn saturated_update_gate_copies_candidate() {
        let mut p = zero_layer(2, 2);
        p.bz = vec![50.0, 50.0];
        for (i, v) in p.wh.as_mut_slice().iter_mut().enumerate() {
            *v = 0.2 * i as f64 - 0.3;
        }
        let h = GruState { h: vec![0.4, -0.8] };
        let x = [0.5, 1.5];
        let (next, rec) = cell_forward(&p, &h, &x).unwrap();
        // candidate computed directly from the definition
        let rh: Vec<f64> = h.h.iter().map(|v| v * 0.5).collect();
        let cat = [rh[0], rh[1], x[0], x[1]];
        for i in 0..2 {
            let direct = (0..4).map(|j| p.wh.get(i, j) * cat[j]).sum::<f64>().tanh();
            assert!((rec.candidate[i] - direct).abs() < 1e-15);
            assert!((next.h[i] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn cell_shape_errors() {
        let p = zero_layer(2, 3);
        assert!(cell_forward(&p, &GruState::zeros(3), &[0.0; 3]).is_err());
        assert!(cell_forward(&p, &GruState::zeros(2), &[0.0; 2]).is_err());
    }

    #[test]
    fn default_parameter_count() {
        let cfg = GruConfig::default();
        let expected =
            3 * (64 * 113 + 64) + 2 * (3 * (64 * 128 + 64)) + (64 * 7 + 7) + (64 * 2 + 2);
        assert_eq!(expected, 72_009);
        assert_eq!(cfg.param_count(), expected);
        let net = GruNetwork::<f32>::init(cfg, 1).unwrap();
        assert_eq!(net.count_params(), expected);
    }

    #[test]
    fn zero_layer_stub_counts_heads_only() {
        let cfg = GruConfig {
            num_layers: 0,
            hidden_size: 10,
            ..GruConfig::default()
        };
        assert_eq!(cfg.param_count(), 10 * 7 + 7 + 10 * 2 + 2);
        let net = GruNetwork::<f32>::init(cfg, 1).unwrap();
        assert_eq!(net.count_params(), cfg.param_count());
        assert!(net.logits(&Matrix::zeros(3, 49)).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = GruConfig {
            hidden_size: 16,
            ..GruConfig::default()
        };
        let a = GruNetwork::<f32>::init(cfg, 9).unwrap();
        let b = GruNetwork::<f32>::init(cfg, 9).unwrap();
        assert_eq!(a.params(), b.params());
        let c = GruNetwork::<f32>::init(cfg, 10).unwrap();
        assert_ne!(a.params(), c.params());
        let bound = 0.25;
        for (i, (_, d)) in a.params().tensors().iter().enumerate() {
            if NetParams::<f32>::is_weight(i, 3) {
                assert!(d.iter().all(|v| v.abs() <= bound));
            } else {
                assert!(d.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let cfg = GruConfig {
            hidden_size: 8,
            ..GruConfig::default()
        };
        let net = GruNetwork::<f64>::from_params(cfg, 0, NetParams::zeros(&cfg)).unwrap();
        let (a, p) = net.logits(&Matrix::zeros(200, 49)).unwrap();
        assert_eq!(a, vec![0.0; 7]);
        assert_eq!(p, vec![0.0; 2]);
    }

    #[test]
    fn traced_and_plain_forward_agree() {
        let cfg = GruConfig {
            input_size: 5,
            hidden_size: 6,
            ..GruConfig::default()
        };
        let net = GruNetwork::<f64>::init(cfg, 3).unwrap();
        let w = Matrix::from_vec(12, 5, (0..60).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let out = net.forward(&w).unwrap();
        let (a, p) = net.logits(&w).unwrap();
        assert_eq!(out.activity, a);
        assert_eq!(out.presence, p);
        assert_eq!(out.trace.len(), 12);
        assert_eq!(out.trace.layers.len(), 3);
    }

    #[test]
    fn window_shape_is_checked() {
        let net = GruNetwork::<f32>::init(GruConfig::default(), 0).unwrap();
        assert!(matches!(
            net.logits(&Matrix::zeros(10, 48)),
            Err(GruError::Shape(_))
        ));
    }
}
