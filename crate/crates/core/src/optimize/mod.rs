//! Portfolio optimizers.
//!
//! * [`mvo_plugin`]: plug-in mean-variance optimization.
//! * [`rpo`]: mean-variance with an ellipsoidal uncertainty set around the
//!   mean, radius calibrated by [`rpo_kappa`].
//! * [`bumvo_worstcase`]: worst case over the bootstrap replicates that fall
//!   inside an empirical confidence box.
//! * [`bumvo_percentile`]: maximizes a percentile of the bootstrapped utility
//!   distribution by projected subgradient ascent.
//! * [`bumvo_chance`]: maximizes mean bootstrapped utility subject to a floor
//!   on its percentile.

mod ascent;
mod bumvo;
mod mvo;
mod project;
mod utility;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ascent::{AscentOutcome, StartRule};
pub use bumvo::{
    bumvo_chance, bumvo_percentile, bumvo_percentile_with_starts, bumvo_worstcase,
    bumvo_worstcase_with_config, worstcase_members, ChanceSolution,
};
pub use mvo::{mvo_objective, mvo_plugin, rpo, rpo_kappa, rpo_objective};
pub use project::project;
pub use utility::{percentile, percentile_index, percentile_subgradient, utilities, utility};

/// Portfolio weight vector `θ`.
pub type Weights = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    LongOnly,
    LongShort,
    /// No projection at all; budget and bound are ignored.
    Unconstrained,
}

/// Feasible set for the weights.
///
/// * long-only: `θ ≥ 0`, `Σθ = budget`
/// * long-short: `|θ_k| ≤ bound`, `Σθ = budget`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub regime: Regime,
    pub budget: f64,
    pub bound: f64,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self::long_only()
    }
}

impl ConstraintSet {
    pub fn long_only() -> Self {
        Self {
            regime: Regime::LongOnly,
            budget: 1.0,
            bound: 1.0,
        }
    }

    pub fn long_short() -> Self {
        Self {
            regime: Regime::LongShort,
            budget: 1.0,
            bound: 1.0,
        }
    }

    pub fn unconstrained() -> Self {
        Self {
            regime: Regime::Unconstrained,
            budget: 1.0,
            bound: 1.0,
        }
    }

    pub fn check_feasible(&self, d: usize) -> Result<()> {
        let infeasible = |msg: String| Err(Error::InfeasibleConstraints(msg));
        if d == 0 {
            return infeasible("zero assets".into());
        }
        match self.regime {
            Regime::Unconstrained => Ok(()),
            Regime::LongOnly if !(self.budget >= 0.0) => {
                infeasible(format!("long-only budget {} is negative", self.budget))
            }
            Regime::LongOnly => Ok(()),
            Regime::LongShort if !(self.bound >= 0.0) => {
                infeasible(format!("bound {} is negative", self.bound))
            }
            Regime::LongShort if self.budget.abs() > d as f64 * self.bound => infeasible(format!(
                "budget {} exceeds {d} assets × bound {}",
                self.budget, self.bound
            )),
            Regime::LongShort => Ok(()),
        }
    }

    /// Whether `theta` satisfies the constraints to `tol`.
    pub fn is_satisfied(&self, theta: &Weights, tol: f64) -> bool {
        if theta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let budget_ok = (theta.sum() - self.budget).abs() <= tol;
        match self.regime {
            Regime::Unconstrained => true,
            Regime::LongOnly => budget_ok && theta.iter().all(|&v| v >= -tol),
            Regime::LongShort => budget_ok && theta.iter().all(|&v| v.abs() <= self.bound + tol),
        }
    }

    /// Equal weights `budget / d` projected onto the set.
    pub fn equal_weight(&self, d: usize) -> Result<Weights> {
        let ew = DVector::from_element(d, self.budget / d as f64);
        project(&ew, self)
    }
}

/// Risk aversion, percentile level, confidence level and ellipsoid radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessParams {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub kappa2: f64,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 0.25,
            gamma: 0.95,
            kappa2: 0.0,
        }
    }
}

impl RobustnessParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda > 0.0) {
            return bad(format!("risk aversion {} must be positive", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("percentile level {} outside (0, 1)", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("confidence level {} outside (0, 1)", self.gamma));
        }
        if !(self.kappa2 >= 0.0) {
            return bad(format!("ellipsoid radius {} is negative", self.kappa2));
        }
        Ok(())
    }
}

/// Settings for the projected subgradient ascent on bootstrap objectives.
///
/// Steps are `learning_rate · decay^k / L` times the subgradient, where `L`
/// is `λ` times the largest replicate covariance row-sum, so the learning
/// rate is expressed relative to the classical `1/L` step. After `patience`
/// consecutive iterations without improving the best objective the iterate
/// returns to the best point and the step is halved. The run stops when the
/// unit projected-gradient step is below `tolerance` or the step scale
/// collapses below `tolerance`.
///
/// `max_subsets` bounds the exact search of the percentile optimizer: the
/// `α` percentile of `S` utilities is the largest minimum over subsets of
/// size `S − ⌈αS⌉ + 1`, and when there are at most this many such subsets
/// each concave maximin problem is solved and its solution used as a start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientAscentConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub patience: usize,
    pub starts: StartRule,
    #[serde(default = "default_max_subsets")]
    pub max_subsets: usize,
}

fn default_max_subsets() -> usize {
    256
}

impl Default for GradientAscentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            decay: 1.0,
            tolerance: 1e-8,
            max_iters: 10_000,
            patience: 20,
            starts: StartRule::default(),
            max_subsets: default_max_subsets(),
        }
    }
}

impl GradientAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || !(self.decay > 0.0 && self.decay <= 1.0)
            || !(self.tolerance > 0.0)
            || self.max_iters == 0
            || self.patience == 0
        {
            return Err(Error::InvalidParameter(format!(
                "invalid gradient ascent config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Optimizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Weights,
    /// Objective of the optimizer that produced the weights.
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first; the weights are then the
    /// best iterate seen.
    pub converged: bool,
}

/// Upper bound on the largest eigenvalue: maximum absolute row sum.
pub(crate) fn row_sum_bound(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
