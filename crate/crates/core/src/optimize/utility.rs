use nalgebra::DVector;

use super::Weights;
use crate::error::{Error, Result};
use crate::estimate::{MomentEstimate, ReplicateEnsemble};
use crate::stats::type1_rank;

/// Mean-variance utility `θᵀμ - (λ/2) θᵀΣθ`.
pub fn utility(theta: &Weights, m: &MomentEstimate, lambda: f64) -> f64 {
    theta.dot(&m.mu) - 0.5 * lambda * m.sigma.dot(&(theta * theta.transpose()))
}

/// Quadratic form via a matrix-vector product; cheaper than `utility` for
/// repeated evaluation.
#[inline]
pub(crate) fn utility_fast(theta: &Weights, m: &MomentEstimate, lambda: f64) -> f64 {
    let s_theta = &m.sigma * theta;
    theta.dot(&m.mu) - 0.5 * lambda * theta.dot(&s_theta)
}

/// Gradient of [`utility`] in `θ`: `μ - λΣθ`.
pub(crate) fn utility_gradient(theta: &Weights, m: &MomentEstimate, lambda: f64) -> DVector<f64> {
    &m.mu - (&m.sigma * theta) * lambda
}

/// Utility of `theta` under every replicate, in replicate order.
pub fn utilities(theta: &Weights, e: &ReplicateEnsemble, lambda: f64) -> Vec<f64> {
    e.estimates
        .iter()
        .map(|m| utility_fast(theta, m, lambda))
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "percentile level {alpha} outside (0, 1)"
        )))
    }
}

/// Index of the element realizing the type-1 `alpha` percentile: the value at
/// 1-based sorted rank `⌈α·S⌉`, attributed to the lowest index holding it.
pub fn percentile_index(values: &[f64], alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::InvalidParameter("percentile of an empty list".into()));
    }
    let k = type1_rank(alpha, values.len()) - 1;
    let mut buf = values.to_vec();
    let (_, target, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
    let target = *target;
    Ok(values
        .iter()
        .position(|v| v.total_cmp(&target).is_eq())
        .expect("selected value comes from the list"))
}

/// Type-1 empirical percentile of `values` at level `alpha`.
pub fn percentile(values: &[f64], alpha: f64) -> Result<f64> {
    percentile_index(values, alpha).map(|i| values[i])
}

/// Subgradient of `θ ↦ P_α({U_i(θ)})`: the utility gradient of the replicate
/// that realizes the percentile.
pub fn percentile_subgradient(
    theta: &Weights,
    e: &ReplicateEnsemble,
    lambda: f64,
    alpha: f64,
) -> Result<DVector<f64>> {
    if theta.len() != e.dim() {
        return Err(Error::Dimension {
            expected: e.dim(),
            got: theta.len(),
        });
    }
    let u = utilities(theta, e, lambda);
    let i = percentile_index(&u, alpha)?;
    Ok(utility_gradient(theta, &e.estimates[i], lambda))
}
