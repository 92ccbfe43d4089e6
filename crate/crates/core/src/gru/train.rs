use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::backward_bptt;
use super::loss::softmax_cross_entropy;
use super::network::{GruNetwork, NetParams};
use super::GruError;
use crate::classes::ClassLabel;
use crate::exec::Exec;
use crate::matrix::Matrix;
use crate::real::Real;

/// A labelled training window, `timesteps x features`.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a, T> {
    pub features: &'a Matrix<T>,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Optimizer steps in total.
    pub steps: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            steps: 200,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: NetParams<T>,
    v: NetParams<T>,
    t: i32,
    cfg: TrainConfig,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &GruNetwork<T>, cfg: TrainConfig) -> Self {
        let zeros = net.params().zeros_like();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn update(&mut self, net: &mut GruNetwork<T>, grads: &NetParams<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.cfg.beta1), T::of(self.cfg.beta2));
        let lr = T::of(self.cfg.learning_rate);
        let eps = T::of(self.cfg.epsilon);
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let params = net.params_mut();
        for (((p, m), v), g) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grads.tensors())
        {
            for i in 0..p.len() {
                let gi = g.1[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Joint loss `CE(activity) + CE(presence)` of one window and its gradient.
/// Empty-room windows carry no activity target, so their activity loss
/// weight is zero.
pub fn example_loss_and_grad<T: Real>(
    net: &GruNetwork<T>,
    ex: &Example<'_, T>,
) -> Result<(T, NetParams<T>), GruError> {
    let out = net.forward(ex.features)?;
    let (lp, dp) = softmax_cross_entropy(&out.presence, ex.label.presence_index())?;
    let (la, da) = match ex.label.activity_index() {
        Some(a) => softmax_cross_entropy(&out.activity, a)?,
        None => (T::zero(), vec![T::zero(); out.activity.len()]),
    };
    let grads = backward_bptt(net, &out.trace, &da, &dp)?;
    Ok((la + lp, grads))
}

/// Mean loss and mean gradient over a batch. Per-window gradients may be
/// computed in parallel; they are always summed in batch order.
pub fn batch_gradients<T: Real>(
    net: &GruNetwork<T>,
    batch: &[Example<'_, T>],
    exec: Exec,
) -> Result<(T, NetParams<T>), GruError> {
    if batch.is_empty() {
        return Err(GruError::Config("empty batch".into()));
    }
    let per_example = exec.map(batch, |ex| example_loss_and_grad(net, ex));
    let mut total = net.params().zeros_like();
    let mut loss = T::zero();
    for r in per_example {
        let (l, g) = r?;
        loss += l;
        total.add_assign(&g);
    }
    let inv = T::one() / T::of(batch.len() as f64);
    total.scale(inv);
    Ok((loss * inv, total))
}

/// One Adam step on `batch`. Returns the batch's mean loss before the update.
pub fn train_step<T: Real>(
    net: &mut GruNetwork<T>,
    batch: &[Example<'_, T>],
    opt: &mut Adam<T>,
    exec: Exec,
) -> Result<T, GruError> {
    let (loss, mut grads) = batch_gradients(net, batch, exec)?;
    let norm = grads.norm_sq().sqrt();
    if !loss.is_finite() || !norm.is_finite() {
        return Err(GruError::Divergence {
            step: opt.t as usize,
            loss: loss.as_f64(),
            detail: format!("gradient norm {}, batch of {}", norm.as_f64(), batch.len()),
        });
    }
    if let Some(clip) = opt.cfg.clip_norm {
        let clip = T::of(clip);
        if norm > clip {
            grads.scale(clip / norm);
        }
    }
    opt.update(net, &grads);
    Ok(loss)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss at every step.
    pub losses: Vec<f64>,
}

/// Runs `cfg.steps` Adam steps over shuffled mini-batches of `data`.
/// `progress` sees `(step, loss)` after every step.
pub fn fit<T: Real>(
    net: &mut GruNetwork<T>,
    data: &[Example<'_, T>],
    cfg: &TrainConfig,
    exec: Exec,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainReport, GruError> {
    if data.is_empty() {
        return Err(GruError::Config("no training data".into()));
    }
    if cfg.batch_size == 0 {
        return Err(GruError::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(net, cfg.clone());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut report = TrainReport::default();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for step in 0..cfg.steps {
        batch.clear();
        while batch.len() < cfg.batch_size.min(data.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(data[order[cursor]]);
            cursor += 1;
        }
        let loss = train_step(net, &batch, &mut opt, exec)?.as_f64();
        report.losses.push(loss);
        progress(step, loss);
    }
    Ok(report)
}
