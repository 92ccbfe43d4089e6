use csi_har::gru::{GruNetwork, NetParams};
use csi_har::Matrix;

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// `sum_j w[i][j] * v[j]` over the concatenation `[h, x]`.
fn gate_sum(w: &Matrix<f64>, i: usize, h: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..h.len() {
        s += w.get(i, j) * h[j];
    }
    for j in 0..x.len() {
        s += w.get(i, h.len() + j) * x[j];
    }
    s
}

/// Scalar-by-scalar forward pass straight from the gate equations.
pub fn forward(p: &NetParams<f64>, window: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let steps = window.rows();
    let mut seq: Vec<Vec<f64>> = (0..steps).map(|t| window.row(t).to_vec()).collect();
    for l in &p.layers {
        let hid = l.bz.len();
        let mut h = vec![0.0; hid];
        let mut out = Vec::with_capacity(steps);
        for x in &seq {
            let mut z = vec![0.0; hid];
            let mut rh = vec![0.0; hid];
            for i in 0..hid {
                z[i] = sig(gate_sum(&l.wz, i, &h, x) + l.bz[i]);
                rh[i] = sig(gate_sum(&l.wr, i, &h, x) + l.br[i]) * h[i];
            }
            let mut next = vec![0.0; hid];
            for i in 0..hid {
                let cand = (gate_sum(&l.wh, i, &rh, x) + l.bh[i]).tanh();
                next[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
            }
            h = next;
            out.push(h.clone());
        }
        seq = out;
    }
    let last = seq.last().expect("non-empty window");
    let head = |w: &Matrix<f64>, b: &[f64]| -> Vec<f64> {
        (0..b.len())
            .map(|i| b[i] + (0..last.len()).map(|j| w.get(i, j) * last[j]).sum::<f64>())
            .collect()
    };
    (
        head(&p.activity.w, &p.activity.b),
        head(&p.presence.w, &p.presence.b),
    )
}

/// `da . activity + dp . presence` for the network's current parameters.
pub fn projected_output(
    net: &GruNetwork<f64>,
    window: &Matrix<f64>,
    da: &[f64],
    dp: &[f64],
) -> f64 {
    let (a, p) = forward(net.params(), window);
    a.iter().zip(da).map(|(x, y)| x * y).sum::<f64>()
        + p.iter().zip(dp).map(|(x, y)| x * y).sum::<f64>()
}

/// Central finite differences of [`projected_output`] for every parameter,
/// flattened in storage order.
pub fn finite_difference_grad(
    net: &GruNetwork<f64>,
    window: &Matrix<f64>,
    da: &[f64],
    dp: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut work = net.clone();
    let sizes: Vec<usize> = net
        .params()
        .tensors()
        .iter()
        .map(|(_, d)| d.len())
        .collect();
    let mut out = Vec::new();
    for (ti, &n) in sizes.iter().enumerate() {
        for j in 0..n {
            let orig = work.params().tensors()[ti].1[j];
            work.params_mut().tensors_mut()[ti][j] = orig + step;
            let plus = projected_output(&work, window, da, dp);
            work.params_mut().tensors_mut()[ti][j] = orig - step;
            let minus = projected_output(&work, window, da, dp);
            work.params_mut().tensors_mut()[ti][j] = orig;
            out.push((plus - minus) / (2.0 * step));
        }
    }
    out
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// A small network with every parameter uniform in `[-scale, scale]` and a
/// matching random window, both determined by `seed`.
pub fn random_tiny_net(seed: u64, scale: f64) -> (GruNetwork<f64>, Matrix<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cfg = csi_har::gru::GruConfig {
        input_size: rng.random_range(1..=4),
        hidden_size: rng.random_range(1..=4),
        num_layers: rng.random_range(1..=3),
        activity_classes: rng.random_range(1..=3),
        presence_classes: rng.random_range(1..=2),
    };
    let mut net = GruNetwork::<f64>::init(cfg, seed).expect("valid config");
    for t in net.params_mut().tensors_mut() {
        for v in t {
            *v = rng.random_range(-scale..=scale);
        }
    }
    let steps = rng.random_range(1..=6);
    let data = (0..steps * cfg.input_size)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    (
        net,
        Matrix::from_vec(steps, cfg.input_size, data).expect("sized"),
    )
}
