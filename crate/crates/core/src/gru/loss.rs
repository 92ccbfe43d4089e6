use super::GruError;
use crate::classes::ClassLabel;
use crate::real::Real;

pub const DEFAULT_PRESENCE_THRESHOLD: f64 = 0.5;

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`, and its gradient
/// `softmax - one_hot(target)`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &[T],
    target: usize,
) -> Result<(T, Vec<T>), GruError> {
    if target >= logits.len() {
        return Err(GruError::Index {
            index: target,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
    let log_sum = sum.ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= T::one();
    Ok((loss, grad))
}

/// Probabilities and gated decision for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub activity_probs: Vec<f64>,
    /// Probability that somebody is present.
    pub presence_prob: f64,
    pub label: ClassLabel,
}

/// Softmaxes both heads; if the empty-room probability exceeds `threshold`
/// the decision is [`ClassLabel::NoPerson`] whatever the activity head says.
pub fn decide(activity_logits: &[f32], presence_logits: &[f32], threshold: f64) -> Prediction {
    let act: Vec<f64> = activity_logits.iter().map(|&v| f64::from(v)).collect();
    let pres: Vec<f64> = presence_logits.iter().map(|&v| f64::from(v)).collect();
    let activity_probs = softmax(&act);
    let presence = softmax(&pres);
    let presence_prob = presence.get(1).copied().unwrap_or(0.0);
    let label = if presence[0] > threshold {
        ClassLabel::NoPerson
    } else {
        let best = activity_probs
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &p)| if p > b.1 { (i, p) } else { b },
            )
            .0;
        ClassLabel::from_id(best).unwrap_or(ClassLabel::NoPerson)
    };
    Prediction {
        activity_probs,
        presence_prob,
        label,
    }
}
