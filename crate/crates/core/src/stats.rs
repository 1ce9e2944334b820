//! Small order-statistic and moment helpers shared across modules.

use crate::error::{Error, Result};

/// 1-based rank `⌈p·n⌉` of the lower (type-1) empirical quantile, clamped to
/// `[1, n]`. A relative slack of 1e-9 absorbs rounding in `p` so that, for
/// example, `p = 1 - 0.05` with `n = 100` selects rank 95.
pub fn type1_rank(p: f64, n: usize) -> usize {
    let raw = p * n as f64;
    let rank = (raw - 1e-9 * raw.abs().max(1.0)).ceil();
    (rank.max(1.0) as usize).min(n)
}

/// Type-1 empirical quantile of `values` at level `p`.
pub fn type1_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("quantile of an empty list".into()));
    }
    let k = type1_rank(p, values.len()) - 1;
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*v)
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Arithmetic mean; exact for a constant list.
pub fn mean(values: &[f64]) -> f64 {
    if !values.is_empty() && is_constant(values) {
        return values[0];
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with divisor `n - 1`; exactly 0 for a constant
/// list.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 || is_constant(values) {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Lag-1 autocorrelation `Σ(x_t - m)(x_{t-1} - m) / Σ(x_t - m)²`.
pub fn lag1_autocorrelation(values: &[f64]) -> f64 {
    let m = mean(values);
    let den: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = values
        .windows(2)
        .map(|w| (w[1] - m) * (w[0] - m))
        .sum();
    num / den
}
