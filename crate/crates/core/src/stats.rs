//! Small statistics helpers: summaries, Wilson score intervals, log-domain means.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); zero for a single value.
    pub std_dev: f64,
    pub std_err: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Summary {
                count,
                mean: f64::NAN,
                std_dev: f64::NAN,
                std_err: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Summary {
            count,
            mean,
            std_dev,
            std_err: std_dev / (count as f64).sqrt(),
        }
    }
}

/// Two-sided normal quantile for confidence `level` (0.95 → 1.95996…).
pub fn z_for(level: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `successes` out of `trials` at confidence `level`.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_for(level);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// ln(Σ exp(x_i)).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Ordinary least squares slope and intercept of y against x.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_zero_successes() {
        let (lo, hi) = wilson_interval(0, 2000, 0.95);
        assert_eq!(lo, 0.0);
        // z^2 / (n + z^2)
        let z2 = z_for(0.95).powi(2);
        assert!((hi - z2 / (2000.0 + z2)).abs() < 1e-12);
        assert!((hi - 1.917e-3).abs() < 1e-5);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(1, 10), (5, 10), (10, 10), (37, 1000)] {
            let (lo, hi) = wilson_interval(k, n, 0.95);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
        assert!((z_for(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn summary_basic() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lse_and_fit() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let (m, c) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}
