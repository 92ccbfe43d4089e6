use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MedianConfig {
    radius: usize,
}

impl MedianConfig {
    pub fn new(radius: usize) -> Result<Self, DspError> {
        if radius == 0 {
            return Err(DspError::MedianRadius);
        }
        Ok(Self { radius })
    }

    pub fn radius(self) -> usize {
        self.radius
    }

    pub fn window_len(self) -> usize {
        2 * self.radius + 1
    }
}

/// Sliding median over `[n-k, n+k]`, with the window truncated at both ends.
/// Even-sized truncated windows take the mean of the two middle values.
///
/// Keeps a sorted copy of the current window and updates it incrementally.
pub fn median_filter(x: &[f64], cfg: MedianConfig) -> Result<Vec<f64>, DspError> {
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let k = cfg.radius;
    let last = x.len() - 1;
    let mut sorted: Vec<f64> = Vec::with_capacity(2 * k + 1);
    let insert = |sorted: &mut Vec<f64>, v: f64| {
        let pos = sorted.partition_point(|p| p.total_cmp(&v).is_lt());
        sorted.insert(pos, v);
    };
    for &v in &x[..=k.min(last)] {
        insert(&mut sorted, v);
    }
    let mut out = Vec::with_capacity(x.len());
    let (mut lo, mut hi) = (0usize, k.min(last));
    for n in 0..x.len() {
        let want_lo = n.saturating_sub(k);
        let want_hi = (n + k).min(last);
        while hi < want_hi {
            hi += 1;
            insert(&mut sorted, x[hi]);
        }
        while lo < want_lo {
            let v = x[lo];
            let pos = sorted.partition_point(|p| p.total_cmp(&v).is_lt());
            sorted.remove(pos);
            lo += 1;
        }
        let m = sorted.len();
        out.push(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sort each truncated window from scratch.
    fn oracle(x: &[f64], k: usize) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                let lo = n.saturating_sub(k);
                let hi = (n + k).min(x.len() - 1);
                let mut w = x[lo..=hi].to_vec();
                w.sort_by(f64::total_cmp);
                let m = w.len();
                if m % 2 == 1 {
                    w[m / 2]
                } else {
                    (w[m / 2 - 1] + w[m / 2]) / 2.0
                }
            })
            .collect()
    }

    fn cfg(k: usize) -> MedianConfig {
        MedianConfig::new(k).unwrap()
    }

    #[test]
    fn worked_example() {
        let x = [1.0, 5.0, 2.0, 8.0, 3.0];
        let expected = [3.0, 2.0, 5.0, 3.0, 5.5];
        assert_eq!(oracle(&x, 1), expected);
        assert_eq!(median_filter(&x, cfg(1)).unwrap(), expected);
    }

    #[test]
    fn impulse_is_rejected() {
        let x = [0.0, 0.0, 99.0, 0.0, 0.0];
        assert_eq!(median_filter(&x, cfg(1)).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn constant_is_fixed_point() {
        let x = vec![4.25; 17];
        assert_eq!(median_filter(&x, cfg(3)).unwrap(), x);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            median_filter(&[], cfg(1)),
            Err(DspError::EmptyInput)
        ));
        assert!(matches!(MedianConfig::new(0), Err(DspError::MedianRadius)));
    }

    #[test]
    fn radius_larger_than_series() {
        let x = [3.0, 1.0, 2.0];
        assert_eq!(median_filter(&x, cfg(10)).unwrap(), oracle(&x, 10));
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(
            x in prop::collection::vec(-100.0f64..100.0, 1..200),
            k in 1usize..8,
        ) {
            prop_assert_eq!(median_filter(&x, cfg(k)).unwrap(), oracle(&x, k));
        }
    }
}
