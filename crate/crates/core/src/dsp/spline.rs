/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Returns `None` unless there are at least two strictly increasing knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let j = i - 1;
                diag[j] = 2.0 * (h0 + h1);
                upper[j] = h1;
                rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                if j > 0 {
                    let w = h0 / diag[j - 1];
                    diag[j] -= w * upper[j - 1];
                    rhs[j] -= w * rhs[j - 1];
                }
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
            }
        }
        Some(Self { xs, ys, m })
    }

    fn eval_in(&self, j: usize, t: f64) -> f64 {
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - t, t - x0);
        self.m[j] * a * a * a / (6.0 * h)
            + self.m[j + 1] * b * b * b / (6.0 * h)
            + (self.ys[j] / h - self.m[j] * h / 6.0) * a
            + (self.ys[j + 1] / h - self.m[j + 1] * h / 6.0) * b
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = self.xs.len() - 2;
        let j = self
            .xs
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(last);
        self.eval_in(j, t)
    }

    /// Evaluates at `0, 1, ..., len - 1`.
    pub fn eval_grid(&self, len: usize) -> Vec<f64> {
        let last = self.xs.len() - 2;
        let mut j = 0;
        (0..len)
            .map(|i| {
                let t = i as f64;
                while j < last && self.xs[j + 1] <= t {
                    j += 1;
                }
                self.eval_in(j, t)
            })
            .collect()
    }
}
