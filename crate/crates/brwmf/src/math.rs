//! Small numerical helpers shared across modules.
//!
//! All reductions here use a fixed left-to-right accumulation order so that
//! repeated runs (and runs under different parallelism) produce identical
//! bytes.

/// Max-shifted log of a sum of exponentials, `log Σ_i exp(terms[i])`.
///
/// Accumulates left to right after shifting by the maximum; safe for
/// exponents up to hundreds in magnitude.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    debug_assert!(!terms.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &t in terms {
        if t > max {
            max = t;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut acc = 0.0;
    for &t in terms {
        acc += (t - max).exp();
    }
    max + acc.ln()
}

/// Streaming variant of [`log_sum_exp`] over an iterator of exponents.
///
/// Two-pass computation is impossible on a stream, so the shift tracks the
/// running maximum; the accumulation order is still the iteration order.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExpAcc {
    max: f64,
    sum: f64,
}

impl LogSumExpAcc {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, term: f64) {
        if term <= self.max {
            self.sum += (term - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max.is_finite() {
            self.max + self.sum.ln()
        } else {
            self.max
        }
    }
}

impl Default for LogSumExpAcc {
    fn default() -> Self {
        Self::new()
    }
}

/// Scalar product of two equal-length vectors.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two points.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let diff = a[i] - b[i];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Solves the dense system `A x = b` by Gaussian elimination with partial
/// pivoting. `A` is row-major `n × n`. Returns `None` when a pivot is
/// (numerically) zero. Intended for the tiny systems of this crate (d ≤ 3).
pub fn solve_linear(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let inv = 1.0 / m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

/// Ordinary least squares of `y` against `x`: returns `(slope, intercept,
/// slope_stderr)`. Requires at least two points; stderr is 0 for exactly two.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 2);
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (y[i] - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if x.len() == 2 {
        return (slope, intercept, 0.0);
    }
    let mut ss_res = 0.0;
    for i in 0..x.len() {
        let r = y[i] - intercept - slope * x[i];
        ss_res += r * r;
    }
    let stderr = (ss_res / ((n - 2.0) * sxx)).sqrt();
    (slope, intercept, stderr)
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
