use nalgebra::{Cholesky, DVector};

use super::utility::{utility_fast, utility_gradient};
use super::{project, row_sum_bound, ConstraintSet, Regime, Solution, Weights};
use crate::error::{Error, Result};
use crate::estimate::{EstimationCovariance, MomentEstimate};
use crate::special::chi_squared_quantile;

const SMOOTH_MAX_ITERS: usize = 200_000;
const ARMIJO: f64 = 1e-4;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "risk aversion {lambda} must be positive"
        )))
    }
}

fn check_moments(m: &MomentEstimate) -> Result<()> {
    if m.mu.iter().chain(m.sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite moment estimate".into()));
    }
    Ok(())
}

/// Projected gradient ascent with Armijo backtracking along the projection
/// arc, for concave objectives that are smooth away from a few kinks.
///
/// `lipschitz` seeds the first trial step as `1/lipschitz`; accepted steps
/// are doubled on the next iteration, so a loose bound only costs a few
/// backtracks.
pub(crate) fn smooth_ascent<F, G>(
    f: F,
    grad: G,
    start: &Weights,
    c: &ConstraintSet,
    lipschitz: f64,
) -> Result<Solution>
where
    F: Fn(&Weights) -> f64,
    G: Fn(&Weights) -> DVector<f64>,
{
    let mut x = project(start, c)?;
    let mut fx = f(&x);
    let base = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let mut step = base;
    for it in 1..=SMOOTH_MAX_ITERS {
        let g = grad(&x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        let mut t = step;
        let accepted = loop {
            let y = project(&(&x + &g * t), c)?;
            let fy = f(&y);
            let dx = &y - &x;
            if fy >= fx + ARMIJO * g.dot(&dx) {
                break Some((y, fy, dx.norm()));
            }
            t *= 0.5;
            if t < base * 1e-20 {
                break None;
            }
        };
        let Some((y, fy, moved)) = accepted else {
            // no ascent direction at any step size: stationary up to roundoff
            return Ok(Solution {
                weights: x,
                objective: fx,
                iterations: it,
                converged: true,
            });
        };
        x = y;
        fx = fy;
        if moved <= 1e-13 * (1.0 + x.norm()) {
            return Ok(Solution {
                weights: x,
                objective: fx,
                iterations: it,
                converged: true,
            });
        }
        step = (2.0 * t).min(base * 1e6);
    }
    Ok(Solution {
        weights: x,
        objective: fx,
        iterations: SMOOTH_MAX_ITERS,
        converged: false,
    })
}

/// Plug-in mean-variance utility of `theta`.
pub fn mvo_objective(theta: &Weights, m: &MomentEstimate, lambda: f64) -> f64 {
    utility_fast(theta, m, lambda)
}

/// Maximizes `θᵀμ - (λ/2)θᵀΣθ` over the constraint set.
///
/// Unconstrained problems use the closed form `Σ⁻¹μ/λ` via Cholesky, which
/// fails on a singular `Σ`; repair the estimate first. Constrained problems
/// run projected gradient ascent from equal weights.
pub fn mvo_plugin(m: &MomentEstimate, lambda: f64, c: &ConstraintSet) -> Result<Solution> {
    check_lambda(lambda)?;
    check_moments(m)?;
    let d = m.dim();
    c.check_feasible(d)?;
    if c.regime == Regime::Unconstrained {
        let chol = Cholesky::new(m.sigma.clone()).ok_or_else(|| {
            Error::Numeric("covariance is not positive definite; repair it first".into())
        })?;
        let weights = chol.solve(&m.mu) / lambda;
        return Ok(Solution {
            objective: utility_fast(&weights, m, lambda),
            weights,
            iterations: 0,
            converged: true,
        });
    }
    smooth_ascent(
        |x| utility_fast(x, m, lambda),
        |x| utility_gradient(x, m, lambda),
        &c.equal_weight(d)?,
        c,
        lambda * row_sum_bound(&m.sigma),
    )
}

/// `κ²` for the ellipsoidal mean uncertainty set: the `1 - α` quantile of a
/// chi-squared law with `d` degrees of freedom.
pub fn rpo_kappa(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    Ok(chi_squared_quantile(1.0 - alpha, d as f64))
}

/// Robust counterpart `θᵀμ - κ·√(θᵀΩθ) - (λ/2)θᵀΣθ`.
pub fn rpo_objective(
    theta: &Weights,
    m: &MomentEstimate,
    omega: &EstimationCovariance,
    kappa2: f64,
    lambda: f64,
) -> f64 {
    let q = theta.dot(&(&omega.omega * theta)).max(0.0);
    utility_fast(theta, m, lambda) - kappa2.sqrt() * q.sqrt()
}

/// Maximizes [`rpo_objective`] by projected gradient ascent. With `κ² = 0`
/// the penalty vanishes and the problem is exactly [`mvo_plugin`].
pub fn rpo(
    m: &MomentEstimate,
    omega: &EstimationCovariance,
    kappa2: f64,
    lambda: f64,
    c: &ConstraintSet,
) -> Result<Solution> {
    check_lambda(lambda)?;
    check_moments(m)?;
    if !(kappa2 >= 0.0 && kappa2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ellipsoid radius {kappa2} must be finite and nonnegative"
        )));
    }
    let d = m.dim();
    if omega.omega.nrows() != d || omega.omega.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: omega.omega.nrows(),
        });
    }
    if kappa2 == 0.0 {
        return mvo_plugin(m, lambda, c);
    }
    c.check_feasible(d)?;
    let kappa = kappa2.sqrt();
    let start = match c.regime {
        // the penalty is flat at the origin, so start from the plug-in point
        Regime::Unconstrained => mvo_plugin(m, lambda, c)?.weights,
        _ => c.equal_weight(d)?,
    };
    smooth_ascent(
        |x| rpo_objective(x, m, omega, kappa2, lambda),
        |x| {
            let w = &omega.omega * x;
            let q = x.dot(&w);
            let g = utility_gradient(x, m, lambda);
            if q > 0.0 {
                g - w * (kappa / q.sqrt())
            } else {
                g
            }
        },
        &start,
        c,
        lambda * row_sum_bound(&m.sigma) + kappa * row_sum_bound(&omega.omega).sqrt(),
    )
}
