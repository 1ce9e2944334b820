use nalgebra::DVector;

use super::{ConstraintSet, Regime, Weights};
use crate::error::{Error, Result};

/// Euclidean projection of `theta` onto the constraint set.
pub fn project(theta: &Weights, c: &ConstraintSet) -> Result<Weights> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("cannot project non-finite weights".into()));
    }
    c.check_feasible(theta.len())?;
    Ok(match c.regime {
        Regime::Unconstrained => theta.clone(),
        Regime::LongOnly => simplex(theta, c.budget),
        Regime::LongShort => capped_hyperplane(theta, c.budget, c.bound),
    })
}

/// Projection onto `{x ≥ 0, Σx = budget}` by the sort-and-threshold method.
fn simplex(v: &Weights, budget: f64) -> Weights {
    if budget == 0.0 {
        return DVector::zeros(v.len());
    }
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - budget) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

/// Projection onto `{|x_k| ≤ bound} ∩ {Σx = budget}`.
///
/// The minimizer is `clip(v - τ, -bound, bound)` for the scalar `τ` that
/// meets the budget. `τ` is bracketed by bisection, then solved exactly on
/// the coordinates left strictly inside the box.
fn capped_hyperplane(v: &Weights, budget: f64, bound: f64) -> Weights {
    let clip = |x: f64| x.clamp(-bound, bound);
    let total = |tau: f64| v.iter().map(|&x| clip(x - tau)).sum::<f64>();
    let (vmin, vmax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
        (a.min(x), b.max(x))
    });
    let mut lo = vmin - bound - 1.0;
    let mut hi = vmax + bound + 1.0;
    // total is nonincreasing in tau: total(lo) = d·bound, total(hi) = -d·bound
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);

    // exact solve on the coordinates that are strictly inside the box
    let mut clipped_sum = 0.0;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for &x in v.iter() {
        let y = x - tau;
        if y >= bound {
            clipped_sum += bound;
        } else if y <= -bound {
            clipped_sum -= bound;
        } else {
            free_sum += x;
            n_free += 1;
        }
    }
    if n_free > 0 {
        let exact = (free_sum - (budget - clipped_sum)) / n_free as f64;
        if (total(exact) - budget).abs() <= (total(tau) - budget).abs() {
            return v.map(|x| clip(x - exact));
        }
    }
    v.map(|x| clip(x - tau))
}
