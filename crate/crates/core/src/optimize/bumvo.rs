use nalgebra::DVector;

use super::ascent::{ascend, ascend_all, starting_points, AscentOutcome, Criterion};
use super::mvo::mvo_plugin;
use super::utility::{percentile, utilities, utility_fast};
use super::{ConstraintSet, GradientAscentConfig, RobustnessParams, Solution, Weights};
use crate::error::{Error, Result};
use crate::estimate::{in_region, quantile_box, ReplicateEnsemble};
use crate::stats::type1_rank;

fn check_ensemble(e: &ReplicateEnsemble) -> Result<()> {
    if e.is_empty() {
        return Err(Error::InvalidParameter("empty replicate ensemble".into()));
    }
    let bad = e
        .estimates
        .iter()
        .any(|m| m.mu.iter().chain(m.sigma.iter()).any(|v| !v.is_finite()));
    if bad {
        return Err(Error::Numeric("non-finite replicate estimate".into()));
    }
    Ok(())
}

fn check_lambda_alpha(lambda: f64, alpha: f64) -> Result<()> {
    RobustnessParams {
        lambda,
        alpha,
        ..RobustnessParams::default()
    }
    .validate()
}

/// Maximizes the type-1 `α` percentile of the replicate utilities.
pub fn bumvo_percentile(
    e: &ReplicateEnsemble,
    params: &RobustnessParams,
    c: &ConstraintSet,
    g: &GradientAscentConfig,
) -> Result<Solution> {
    bumvo_percentile_with_starts(e, params, c, g, &[]).map(|o| o.solution)
}

/// [`bumvo_percentile`] with additional starting points, e.g. the previous
/// rebalance's weights. Extra starts are projected and tried after the
/// equal-weight point, followed by the best subset maximin solution when
/// the ensemble is small enough to enumerate (see
/// [`GradientAscentConfig::max_subsets`]).
pub fn bumvo_percentile_with_starts(
    e: &ReplicateEnsemble,
    params: &RobustnessParams,
    c: &ConstraintSet,
    g: &GradientAscentConfig,
    extra: &[Weights],
) -> Result<AscentOutcome> {
    check_lambda_alpha(params.lambda, params.alpha)?;
    check_ensemble(e)?;
    g.validate()?;
    c.check_feasible(e.dim())?;
    let crit = Criterion::Percentile {
        alpha: params.alpha,
    };
    let mut extra = extra.to_vec();
    extra.extend(best_subset_maximin(e, params, c, g)?);
    let starts = starting_points(e, params.lambda, crit, c, g.starts, &extra)?;
    ascend_all(e, params.lambda, crit, c, g, &starts)
}

/// `C(n, k)`, or `None` once it exceeds `cap`.
fn binomial_within(n: usize, k: usize, cap: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// The `r`-th smallest of `S` values is the largest minimum over subsets of
/// size `S − r + 1`, so maximizing the percentile is maximizing a concave
/// maximin over each subset. Returns the subset solution with the highest
/// percentile, or nothing when there are more than `g.max_subsets` subsets.
fn best_subset_maximin(
    e: &ReplicateEnsemble,
    params: &RobustnessParams,
    c: &ConstraintSet,
    g: &GradientAscentConfig,
) -> Result<Option<Weights>> {
    let s = e.len();
    let k = s - type1_rank(params.alpha, s) + 1;
    if g.max_subsets == 0 || binomial_within(s, k, g.max_subsets).is_none() {
        return Ok(None);
    }
    let start = c.equal_weight(e.dim())?;
    let mut members: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Weights)> = None;
    loop {
        let crit = Criterion::WorstCase { members: &members };
        let sol = ascend(e, params.lambda, crit, c, g, &start)?;
        let v = percentile(&utilities(&sol.weights, e, params.lambda), params.alpha)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, sol.weights));
        }
        // Next subset in lexicographic order.
        let Some(i) = (0..k).rev().find(|&i| members[i] < s - k + i) else {
            break;
        };
        members[i] += 1;
        for j in i + 1..k {
            members[j] = members[j - 1] + 1;
        }
    }
    Ok(best.map(|(_, w)| w))
}

/// Replicates inside the `γ` quantile box; the whole ensemble when that set is
/// empty or there is a single replicate.
pub fn worstcase_members(e: &ReplicateEnsemble, gamma: f64) -> Result<Vec<usize>> {
    check_ensemble(e)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {gamma} outside (0, 1)"
        )));
    }
    if e.len() == 1 {
        return Ok(vec![0]);
    }
    let region = quantile_box(e, gamma)?;
    let mut members = Vec::new();
    for (i, m) in e.estimates.iter().enumerate() {
        if in_region(m, &region)? {
            members.push(i);
        }
    }
    if members.is_empty() {
        members = (0..e.len()).collect();
    }
    Ok(members)
}

/// Maximizes the minimum utility over the replicates in the `γ` box, with the
/// default ascent settings.
pub fn bumvo_worstcase(
    e: &ReplicateEnsemble,
    gamma: f64,
    lambda: f64,
    c: &ConstraintSet,
) -> Result<Solution> {
    bumvo_worstcase_with_config(e, gamma, lambda, c, &GradientAscentConfig::default())
}

pub fn bumvo_worstcase_with_config(
    e: &ReplicateEnsemble,
    gamma: f64,
    lambda: f64,
    c: &ConstraintSet,
    g: &GradientAscentConfig,
) -> Result<Solution> {
    check_lambda_alpha(lambda, 0.5)?;
    g.validate()?;
    let members = worstcase_members(e, gamma)?;
    c.check_feasible(e.dim())?;
    let crit = Criterion::WorstCase { members: &members };
    let starts = starting_points(e, lambda, crit, c, g.starts, &[])?;
    ascend_all(e, lambda, crit, c, g, &starts).map(|o| o.solution)
}

/// Result of the chance-constrained optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanceSolution {
    /// `objective` is the mean replicate utility.
    pub solution: Solution,
    /// Attained `α` percentile of the replicate utilities.
    pub percentile: f64,
    /// Penalty weight of the accepted run; 0 when the unconstrained maximizer
    /// already satisfies the floor.
    pub rho: f64,
}

const RHO_LADDER: [f64; 7] = [1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6];

/// Maximizes the mean replicate utility subject to
/// `percentile(U(θ), α) ≥ floor_c`.
///
/// The mean utility equals the utility under the averaged moments, so the
/// unconstrained problem is solved exactly first. If it violates the floor,
/// the exact penalty `mean − ρ·max(0, floor_c − percentile)` is maximized for
/// increasing `ρ`. A penalized solution that still misses the floor by a
/// hair is pulled back by bisection along the segment towards the most
/// robust feasible point found. Returns [`Error::ChanceInfeasible`] with the
/// best percentile seen when no tested point meets the floor.
pub fn bumvo_chance(
    e: &ReplicateEnsemble,
    params: &RobustnessParams,
    floor_c: f64,
    c: &ConstraintSet,
    g: &GradientAscentConfig,
) -> Result<ChanceSolution> {
    check_lambda_alpha(params.lambda, params.alpha)?;
    check_ensemble(e)?;
    g.validate()?;
    if floor_c.is_nan() {
        return Err(Error::InvalidParameter("percentile floor is NaN".into()));
    }
    let (lambda, alpha) = (params.lambda, params.alpha);
    let mean = e.mean_estimate();
    let pct = |x: &Weights| percentile(&utilities(x, e, lambda), alpha);
    let mean_u = |x: &Weights| utility_fast(x, &mean, lambda);

    let unconstrained = mvo_plugin(&mean, lambda, c)?;
    let p0 = pct(&unconstrained.weights)?;
    if p0 >= floor_c {
        return Ok(ChanceSolution {
            solution: unconstrained,
            percentile: p0,
            rho: 0.0,
        });
    }

    let robust = bumvo_percentile(e, params, c, g)?;
    let p_robust = pct(&robust.weights)?;
    let mut best_pct = p0.max(p_robust);
    // best feasible point by mean utility: (weights, mean, percentile, rho, iterations, converged)
    let mut feasible: Option<(Weights, f64, f64, f64, usize, bool)> = None;
    if p_robust >= floor_c {
        feasible = Some((
            robust.weights.clone(),
            mean_u(&robust.weights),
            p_robust,
            f64::INFINITY,
            robust.iterations,
            robust.converged,
        ));
    }

    let mut warm: Vec<Weights> = vec![unconstrained.weights.clone(), robust.weights.clone()];
    for rho in RHO_LADDER {
        let crit = Criterion::Penalized {
            alpha,
            floor: floor_c,
            rho,
            mean: &mean,
        };
        let starts = starting_points(e, lambda, crit, c, g.starts, &warm)?;
        let run = ascend_all(e, lambda, crit, c, g, &starts)?.solution;
        let mut x = run.weights.clone();
        let mut p = pct(&x)?;
        best_pct = best_pct.max(p);
        if p < floor_c {
            if let Some((anchor, ..)) = feasible.as_ref() {
                let anchor = anchor.clone();
                (x, p) = pull_back(&x, &anchor, floor_c, &pct)?;
            }
        }
        if p >= floor_c {
            let m = mean_u(&x);
            if feasible.as_ref().is_none_or(|f| m > f.1) {
                feasible = Some((x, m, p, rho, run.iterations, run.converged));
            }
            break;
        }
        warm.push(run.weights);
    }

    match feasible {
        Some((weights, objective, percentile, rho, iterations, converged)) => Ok(ChanceSolution {
            solution: Solution {
                weights,
                objective,
                iterations,
                converged,
            },
            percentile,
            rho,
        }),
        None => Err(Error::ChanceInfeasible {
            best_percentile: best_pct,
        }),
    }
}

/// Bisection on the segment from `x` (infeasible) to `anchor` (feasible),
/// keeping the feasible end; convex combinations stay inside the
/// constraint set.
fn pull_back<P>(x: &Weights, anchor: &Weights, floor: f64, pct: &P) -> Result<(Weights, f64)>
where
    P: Fn(&Weights) -> Result<f64>,
{
    let point = |t: f64| -> DVector<f64> { anchor * t + x * (1.0 - t) };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (anchor.clone(), pct(anchor)?);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let y = point(mid);
        let p = pct(&y)?;
        if p >= floor {
            hi = mid;
            best = (y, p);
        } else {
            lo = mid;
        }
    }
    Ok(best)
}
