/// Sorts every truncated window `[n-k, n+k]` from scratch.
pub fn median_by_sort(x: &[f64], k: usize) -> Vec<f64> {
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
