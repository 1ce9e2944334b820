//! Time-series momentum, transaction-cost backtests and bootstrap strategy
//! utilities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{max_drawdown, sharpe_utility};
use crate::panel::{synthetic_dates, ReturnPanel};
use crate::resample::{generate_all, materialize, BootstrapSpec, IndexPath};

/// Lookback in periods and the multiplier applied to the unit-sign position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsmomParams {
    pub lookback: usize,
    #[serde(default = "one")]
    pub forecast_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TsmomParams {
    pub fn new(lookback: usize) -> Self {
        Self {
            lookback,
            forecast_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 {
            return Err(Error::Strategy("lookback must be at least 1".into()));
        }
        if !(self.forecast_scale >= 0.0 && self.forecast_scale.is_finite()) {
            return Err(Error::Strategy(format!(
                "forecast scale {} must be finite and nonnegative",
                self.forecast_scale
            )));
        }
        Ok(())
    }
}

/// Default lookback grid in trading days, roughly one to twelve months.
pub const DEFAULT_LOOKBACKS: [usize; 6] = [21, 42, 63, 126, 189, 252];

/// Default proportional cost: 5 basis points per unit of traded weight.
pub const DEFAULT_TC: f64 = 5e-4;

/// Proportional costs per unit of traded weight, one per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub tc: Vec<f64>,
    /// Charge `tc·|w_0|` for establishing the first position.
    pub charge_entry: bool,
}

impl CostModel {
    pub fn uniform(tc: f64, d: usize) -> Self {
        Self {
            tc: vec![tc; d],
            charge_entry: true,
        }
    }

    pub fn zero(d: usize) -> Self {
        Self::uniform(0.0, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tc.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Strategy("transaction costs must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Positions per period and asset. Row `t` is held over the return of row
/// `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSeries {
    pub weights: DMatrix<f64>,
}

/// Per-period portfolio returns and the wealth they compound to.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlSeries {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
    /// `values.len() + 1` points starting at 1.
    pub wealth: Vec<f64>,
}

impl PnlSeries {
    pub fn new(dates: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: dates.len(),
            });
        }
        let mut wealth = Vec::with_capacity(values.len() + 1);
        wealth.push(1.0);
        let mut v = 1.0;
        for r in &values {
            v *= 1.0 + r;
            wealth.push(v);
        }
        Ok(Self {
            dates,
            values,
            wealth,
        })
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let dates = synthetic_dates(values.len());
        Self::new(dates, values).expect("labels match by construction")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Final wealth.
    pub fn terminal(&self) -> f64 {
        *self.wealth.last().expect("wealth starts at 1")
    }

    /// Sub-series of the periods in `range`, with wealth restarted at 1.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::Panel(format!(
                "period range {range:?} outside 0..{}",
                self.len()
            )));
        }
        Self::new(
            self.dates[range.clone()].to_vec(),
            self.values[range].to_vec(),
        )
    }
}

/// Sign of the compounded return over `window`, with an exact zero mapped to
/// zero.
fn compounded_sign(window: &[f64]) -> f64 {
    let growth: f64 = window.iter().map(|r| 1.0 + r).product();
    let cum = growth - 1.0;
    if cum > 0.0 {
        1.0
    } else if cum < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Momentum positions: `forecast_scale · sign(Π(1 + r) − 1)` over the last
/// `lookback` returns up to and including row `t`; zero until `lookback`
/// returns are available.
///
/// Rolling log-growth sums decide the sign; windows whose log-growth is
/// within `1e-10` of zero, or that contain a return of −100% or worse, are
/// recompounded directly.
pub fn tsmom_positions(r: &ReturnPanel, p: &TsmomParams) -> Result<PositionSeries> {
    p.validate()?;
    let (t_len, d) = (r.len(), r.n_assets());
    if t_len <= p.lookback {
        return Err(Error::Strategy(format!(
            "{t_len} periods do not exceed the lookback {}",
            p.lookback
        )));
    }
    let l = p.lookback;
    let mut w = DMatrix::zeros(t_len, d);
    for k in 0..d {
        let col: Vec<f64> = r.values().column(k).iter().copied().collect();
        let mut prefix = vec![0.0; t_len + 1];
        let mut ruined = vec![0usize; t_len + 1];
        for (t, &x) in col.iter().enumerate() {
            let ok = x > -1.0;
            prefix[t + 1] = prefix[t] + if ok { x.ln_1p() } else { 0.0 };
            ruined[t + 1] = ruined[t] + usize::from(!ok);
        }
        for t in (l - 1)..t_len {
            let lo = t + 1 - l;
            let log_growth = prefix[t + 1] - prefix[lo];
            let s = if ruined[t + 1] > ruined[lo] || log_growth.abs() < 1e-10 {
                compounded_sign(&col[lo..=t])
            } else {
                log_growth.signum()
            };
            w[(t, k)] = p.forecast_scale * s;
        }
    }
    Ok(PositionSeries { weights: w })
}

/// Per-period returns `w_t·r_{t+1} − Σ_k tc_k·|w_{t+1,k} − w_{t,k}|` for
/// `t = 0..T-1`, dated at the row of `r_{t+1}`. With `charge_entry` the first
/// period also pays `Σ_k tc_k·|w_{0,k}|`.
pub fn backtest_pnl(r: &ReturnPanel, positions: &PositionSeries, cost: &CostModel) -> Result<PnlSeries> {
    cost.validate()?;
    let (t_len, d) = (r.len(), r.n_assets());
    let w = &positions.weights;
    if w.nrows() != t_len || w.ncols() != d {
        return Err(Error::Strategy(format!(
            "positions are {}x{}, returns are {t_len}x{d}",
            w.nrows(),
            w.ncols()
        )));
    }
    if cost.tc.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: cost.tc.len(),
        });
    }
    if t_len < 2 {
        return Err(Error::Strategy("backtest needs at least two periods".into()));
    }
    let x = r.values();
    let mut values = Vec::with_capacity(t_len - 1);
    for t in 0..t_len - 1 {
        let mut v = 0.0;
        for k in 0..d {
            v += w[(t, k)] * x[(t + 1, k)];
            v -= cost.tc[k] * (w[(t + 1, k)] - w[(t, k)]).abs();
            if t == 0 && cost.charge_entry {
                v -= cost.tc[k] * w[(0, k)].abs();
            }
        }
        values.push(v);
    }
    PnlSeries::new(r.dates()[1..].to_vec(), values)
}

/// Momentum backtest of `r` under `p`.
pub fn strategy_pnl(r: &ReturnPanel, p: &TsmomParams, cost: &CostModel) -> Result<PnlSeries> {
    backtest_pnl(r, &tsmom_positions(r, p)?, cost)
}

/// Single-period utility of a scaled unit-sign position
/// `scale·w·μ* − (λ/2)·σ*²·w² − tc*·|w − w_prev|`, where
/// `w = sign(scale·μ*)`.
pub fn scaled_mvo_utility(
    mu_star: f64,
    sigma_star: f64,
    tc_star: f64,
    prev_w: f64,
    p: &TsmomParams,
    lambda: f64,
) -> f64 {
    let f = p.forecast_scale * mu_star;
    let w = if f > 0.0 {
        1.0
    } else if f < 0.0 {
        -1.0
    } else {
        0.0
    };
    p.forecast_scale * w * mu_star - 0.5 * lambda * sigma_star * sigma_star * w * w
        - tc_star * (w - prev_w).abs()
}

/// Performance functional maximized when tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    /// Annualized Sharpe ratio; a flat series scores 0 and a riskless one
    /// scores ±∞ by the sign of its mean.
    #[default]
    Sharpe,
    /// Maximum drawdown as a nonpositive fraction, so larger is better.
    NegMaxdd,
}

impl UtilityKind {
    pub fn evaluate(self, p: &PnlSeries, periods_per_year: usize) -> f64 {
        match self {
            UtilityKind::Sharpe => sharpe_utility(&p.values, periods_per_year),
            UtilityKind::NegMaxdd => max_drawdown(&p.wealth),
        }
    }
}

/// Utilities per parameter, in grid order.
pub type UtilityMap = Vec<(TsmomParams, Vec<f64>)>;

/// Utility of every grid point on every path. The same path serves all grid
/// points for a given replicate.
pub fn strategy_utilities_on_paths(
    r: &ReturnPanel,
    grid: &[TsmomParams],
    paths: &[IndexPath],
    cost: &CostModel,
    util: UtilityKind,
    periods_per_year: usize,
) -> Result<UtilityMap> {
    if grid.is_empty() {
        return Err(Error::Strategy("empty parameter grid".into()));
    }
    if paths.is_empty() {
        return Err(Error::Strategy("no bootstrap paths".into()));
    }
    for p in grid {
        p.validate()?;
        if p.lookback >= r.len() {
            return Err(Error::Strategy(format!(
                "lookback {} not below series length {}",
                p.lookback,
                r.len()
            )));
        }
    }
    // rows: replicate, columns: grid point
    let per_path: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|path| -> Result<Vec<f64>> {
            let x = materialize(r, path)?;
            grid.iter()
                .map(|p| Ok(util.evaluate(&strategy_pnl(&x, p, cost)?, periods_per_year)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, p)| (*p, per_path.iter().map(|row| row[j]).collect()))
        .collect())
}

/// Bootstraps the return panel and evaluates the full signal and backtest
/// pipeline for every grid point on every replicate.
pub fn bootstrap_strategy_utilities(
    r: &ReturnPanel,
    grid: &[TsmomParams],
    spec: &BootstrapSpec,
    cost: &CostModel,
    util: UtilityKind,
    periods_per_year: usize,
) -> Result<UtilityMap> {
    let paths = generate_all(spec, r.len())?;
    strategy_utilities_on_paths(r, grid, &paths, cost, util, periods_per_year)
}

/// Resamples a realized return series along `paths` and scores each copy.
pub fn resampled_series_utilities(
    values: &[f64],
    paths: &[IndexPath],
    util: UtilityKind,
    periods_per_year: usize,
) -> Vec<f64> {
    paths
        .par_iter()
        .map(|path| {
            let v = crate::resample::materialize_series(values, path);
            util.evaluate(&PnlSeries::from_values(v), periods_per_year)
        })
        .collect()
}
