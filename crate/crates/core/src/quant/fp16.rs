use half::f16;

use super::QuantError;
use crate::gru::GruNetwork;

/// Rounds every parameter to the nearest IEEE half-precision value and back.
/// Inference on the result still runs in `f32`.
pub fn fp16_roundtrip(net: &GruNetwork<f32>) -> Result<GruNetwork<f32>, QuantError> {
    let names = net.params().tensor_names();
    if let Some(i) = net
        .params()
        .tensors()
        .iter()
        .position(|t| t.1.iter().any(|v| !v.is_finite()))
    {
        return Err(QuantError::NonFinite { index: i });
    }
    let mut out = net.clone();
    let mut overflowed = Vec::new();
    for (name, t) in names.into_iter().zip(out.params_mut().tensors_mut()) {
        let mut bad = false;
        for v in t.iter_mut() {
            let h = f16::from_f32(*v);
            bad |= h.is_infinite();
            *v = h.to_f32();
        }
        if bad {
            overflowed.push(name);
        }
    }
    if !overflowed.is_empty() {
        return Err(QuantError::Range {
            tensors: overflowed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::GruConfig;

    fn net() -> GruNetwork<f32> {
        let cfg = GruConfig {
            input_size: 3,
            hidden_size: 4,
            num_layers: 1,
            ..GruConfig::default()
        };
        GruNetwork::init(cfg, 9).unwrap()
    }

    #[test]
    fn representable_and_underflowing_values() {
        let mut n = net();
        n.params_mut().activity.b[0] = 1.0;
        n.params_mut().activity.b[1] = 1e-8;
        let r = fp16_roundtrip(&n).unwrap();
        assert_eq!(r.params().activity.b[0], 1.0);
        assert_eq!(r.params().activity.b[1], 0.0);
    }

    #[test]
    fn overflow_names_the_tensor() {
        let mut n = net();
        n.params_mut().presence.w.set(0, 0, 1e6);
        match fp16_roundtrip(&n) {
            Err(QuantError::Range { tensors }) => assert_eq!(tensors, vec!["head.presence.w"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn idempotent() {
        let once = fp16_roundtrip(&net()).unwrap();
        let twice = fp16_roundtrip(&once).unwrap();
        assert_eq!(once.params(), twice.params());
    }
}
