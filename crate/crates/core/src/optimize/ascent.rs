//! Projected subgradient ascent shared by the bootstrap optimizers.

use std::borrow::Cow;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::mvo::smooth_ascent;
use super::utility::{percentile_index, utility_fast, utility_gradient};
use super::{
    project, row_sum_bound, ConstraintSet, GradientAscentConfig, Regime, Solution, Weights,
};
use crate::error::{Error, Result};
use crate::estimate::{MomentEstimate, ReplicateEnsemble};

/// Starting points for the ascent.
///
/// The percentile objective is not concave, so a single start can stall at a
/// local maximum. Besides the projected equal-weight point, `Candidates`
/// also starts from the `top` best projected closed-form solutions
/// `Σ_i⁻¹μ_i/λ` of the individual replicates and of the ensemble mean,
/// ranked by the objective being maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRule {
    EqualWeight,
    Candidates { top: usize },
}

impl Default for StartRule {
    fn default() -> Self {
        StartRule::Candidates { top: 2 }
    }
}

/// Best solution over all starts.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentOutcome {
    pub solution: Solution,
    /// Index of the winning start; 0 is the equal-weight point.
    pub start: usize,
    pub starts: usize,
}

/// Piecewise objective over the replicate utilities.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion<'a> {
    /// Type-1 percentile of all replicate utilities.
    Percentile { alpha: f64 },
    /// Minimum utility over the listed replicates.
    WorstCase { members: &'a [usize] },
    /// Exact penalty `U(θ; mean) − ρ·max(0, floor − percentile)`.
    Penalized {
        alpha: f64,
        floor: f64,
        rho: f64,
        mean: &'a MomentEstimate,
    },
}

/// Marks a penalized objective whose constraint is slack.
const SLACK: usize = usize::MAX;

impl Criterion<'_> {
    /// Objective value and the replicate realizing it.
    pub(crate) fn evaluate(
        &self,
        theta: &Weights,
        e: &ReplicateEnsemble,
        lambda: f64,
    ) -> Result<(f64, usize)> {
        match *self {
            Criterion::Percentile { alpha } => {
                let u: Vec<f64> = e
                    .estimates
                    .iter()
                    .map(|m| utility_fast(theta, m, lambda))
                    .collect();
                let i = percentile_index(&u, alpha)?;
                Ok((u[i], i))
            }
            Criterion::WorstCase { members } => {
                let mut best = (f64::INFINITY, usize::MAX);
                for &i in members {
                    let u = utility_fast(theta, &e.estimates[i], lambda);
                    if u < best.0 || best.1 == usize::MAX {
                        best = (u, i);
                    }
                }
                if best.1 == usize::MAX {
                    return Err(Error::InvalidParameter("empty worst-case set".into()));
                }
                Ok(best)
            }
            Criterion::Penalized {
                alpha,
                floor,
                rho,
                mean,
            } => {
                let u: Vec<f64> = e
                    .estimates
                    .iter()
                    .map(|m| utility_fast(theta, m, lambda))
                    .collect();
                let i = percentile_index(&u, alpha)?;
                let base = utility_fast(theta, mean, lambda);
                if u[i] < floor {
                    Ok((base - rho * (floor - u[i]), i))
                } else {
                    Ok((base, SLACK))
                }
            }
        }
    }

    /// The smooth piece of the objective selected by `active`.
    fn local_model<'e>(&self, e: &'e ReplicateEnsemble, active: usize) -> Cow<'e, MomentEstimate> {
        match *self {
            Criterion::Percentile { .. } | Criterion::WorstCase { .. } => {
                Cow::Borrowed(&e.estimates[active])
            }
            Criterion::Penalized { rho, mean, .. } => {
                if active == SLACK {
                    Cow::Owned(mean.clone())
                } else {
                    let m = &e.estimates[active];
                    Cow::Owned(MomentEstimate {
                        mu: &mean.mu + &m.mu * rho,
                        sigma: &mean.sigma + &m.sigma * rho,
                    })
                }
            }
        }
    }

    pub(crate) fn value(&self, theta: &Weights, e: &ReplicateEnsemble, lambda: f64) -> Result<f64> {
        self.evaluate(theta, e, lambda).map(|(v, _)| v)
    }
}

/// Starting points for `rule`: equal weights first, then the ranked
/// candidates, skipping duplicates.
pub(crate) fn starting_points(
    e: &ReplicateEnsemble,
    lambda: f64,
    crit: Criterion<'_>,
    c: &ConstraintSet,
    rule: StartRule,
    extra: &[Weights],
) -> Result<Vec<Weights>> {
    let d = e.dim();
    let mut starts = vec![c.equal_weight(d)?];
    for x in extra {
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        starts.push(project(x, c)?);
    }
    let StartRule::Candidates { top } = rule else {
        return Ok(dedup(starts));
    };
    if top == 0 {
        return Ok(dedup(starts));
    }
    let mean = e.mean_estimate();
    let mut ranked = Vec::new();
    for m in std::iter::once(&mean).chain(e.estimates.iter()) {
        let Some(chol) = Cholesky::new(m.sigma.clone()) else {
            continue;
        };
        let raw = chol.solve(&m.mu) / lambda;
        if raw.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = project(&raw, c)?;
        let v = crit.value(&x, e, lambda)?;
        ranked.push((v, x));
    }
    // stable sort keeps the mean estimate ahead of equal-valued replicates
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut seen = dedup(starts);
    for (_, x) in ranked {
        if seen.len() >= 1 + extra.len() + top {
            break;
        }
        if !seen.iter().any(|s| (s - &x).amax() <= 1e-12) {
            seen.push(x);
        }
    }
    Ok(seen)
}

fn dedup(v: Vec<Weights>) -> Vec<Weights> {
    let mut out: Vec<Weights> = Vec::with_capacity(v.len());
    for x in v {
        if !out.iter().any(|s| (s - &x).amax() <= 1e-12) {
            out.push(x);
        }
    }
    out
}

/// Runs the ascent from every start and keeps the best final objective,
/// earliest start on ties.
pub(crate) fn ascend_all(
    e: &ReplicateEnsemble,
    lambda: f64,
    crit: Criterion<'_>,
    c: &ConstraintSet,
    cfg: &GradientAscentConfig,
    starts: &[Weights],
) -> Result<AscentOutcome> {
    let mut best: Option<(Solution, usize)> = None;
    for (k, s) in starts.iter().enumerate() {
        let sol = ascend(e, lambda, crit, c, cfg, s)?;
        if best.as_ref().is_none_or(|(b, _)| sol.objective > b.objective) {
            best = Some((sol, k));
        }
    }
    let (solution, start) = best.ok_or_else(|| Error::InvalidParameter("no starting point".into()))?;
    Ok(AscentOutcome {
        solution,
        start,
        starts: starts.len(),
    })
}

/// One projected subgradient run; see [`GradientAscentConfig`] for the step
/// and stopping rules.
///
/// When the loop ends, the utility of the replicate active at the best
/// iterate is maximized from that point, in closed form when unconstrained,
/// and the result is kept if it does not lower the true objective. Where the objective is
/// locally a single replicate's utility this recovers the exact optimum the
/// subgradient steps only approach.
pub(crate) fn ascend(
    e: &ReplicateEnsemble,
    lambda: f64,
    crit: Criterion<'_>,
    c: &ConstraintSet,
    cfg: &GradientAscentConfig,
    start: &Weights,
) -> Result<Solution> {
    cfg.validate()?;
    let replicate_bound = e
        .estimates
        .iter()
        .map(|m| row_sum_bound(&m.sigma))
        .fold(0.0, f64::max);
    let lip = match crit {
        Criterion::Penalized { rho, mean, .. } => {
            lambda * (row_sum_bound(&mean.sigma) + rho * replicate_bound)
        }
        _ => lambda * replicate_bound,
    }
    .max(f64::MIN_POSITIVE);

    let mut x = project(start, c)?;
    let (f0, mut active) = crit.evaluate(&x, e, lambda)?;
    let mut best = (x.clone(), f0, active);
    let mut scale = cfg.learning_rate;
    let mut decay = 1.0;
    let mut stall = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..cfg.max_iters {
        iterations = k + 1;
        let g = utility_gradient(&x, &crit.local_model(e, active), lambda);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite subgradient".into()));
        }
        let unit = project(&(&x + &g / lip), c)?;
        if (&unit - &x).norm() <= cfg.tolerance * (1.0 + x.norm()) {
            converged = true;
            break;
        }
        let next = project(&(&x + &g * (scale * decay / lip)), c)?;
        let (fx, an) = crit.evaluate(&next, e, lambda)?;
        x = next;
        active = an;
        decay *= cfg.decay;
        if fx > best.1 {
            best = (x.clone(), fx, active);
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                x = best.0.clone();
                active = best.2;
                scale *= 0.5;
                stall = 0;
                if scale * decay < cfg.tolerance {
                    converged = true;
                    break;
                }
            }
        }
    }
    let (mut bx, mut bf, ba) = best;
    let m = crit.local_model(e, ba);
    let m = m.as_ref();
    let closed = match c.regime {
        Regime::Unconstrained => Cholesky::new(m.sigma.clone()).map(|ch| ch.solve(&m.mu) / lambda),
        _ => None,
    };
    let polished = match closed {
        Some(w) if w.iter().all(|v| v.is_finite()) => w,
        _ => {
            smooth_ascent(
                |t| utility_fast(t, m, lambda),
                |t| utility_gradient(t, m, lambda),
                &bx,
                c,
                lambda * row_sum_bound(&m.sigma),
            )?
            .weights
        }
    };
    let pf = crit.value(&polished, e, lambda)?;
    if pf >= bf {
        bx = polished;
        bf = pf;
    }
    Ok(Solution {
        weights: bx,
        objective: bf,
        iterations,
        converged,
    })
}
