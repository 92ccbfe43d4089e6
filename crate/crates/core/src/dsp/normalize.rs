use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub x_min: f64,
    pub x_max: f64,
}

/// Maps `x` affinely onto `[0, 1]`. A constant series maps to all zeros.
pub fn minmax_normalize(x: &[f64]) -> Result<(Vec<f64>, NormStats), DspError> {
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let (x_min, x_max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = x_max - x_min;
    let out = if span > 0.0 {
        x.iter()
            .map(|&v| ((v - x_min) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; x.len()]
    };
    Ok((out, NormStats { x_min, x_max }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            minmax_normalize(&[2.0, 4.0, 6.0]).unwrap().0,
            vec![0.0, 0.5, 1.0]
        );
        let (y, s) = minmax_normalize(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        assert_eq!(
            s,
            NormStats {
                x_min: 7.0,
                x_max: 7.0
            }
        );
        assert!(matches!(minmax_normalize(&[]), Err(DspError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn endpoints_and_idempotence(x in prop::collection::vec(-1e6f64..1e6, 2..100)) {
            let (y, s) = minmax_normalize(&x).unwrap();
            prop_assume!(s.x_max > s.x_min);
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
            let (z, _) = minmax_normalize(&y).unwrap();
            for (a, b) in y.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
