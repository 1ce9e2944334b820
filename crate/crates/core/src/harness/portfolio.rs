use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ResampleConfig;
use crate::error::{Error, Result};
use crate::estimate::{
    ensemble_moments, estimation_covariance, psd_repair, sample_moments, EstimationCovariance,
    MomentEstimate, ReplicateEnsemble,
};
use crate::evaluate::{metrics, MetricReport, PERIODS_PER_YEAR};
use crate::optimize::{
    bumvo_percentile_with_starts, bumvo_worstcase_with_config, mvo_plugin, rpo, rpo_kappa,
    ConstraintSet, GradientAscentConfig, RobustnessParams, Weights,
};
use crate::panel::ReturnPanel;
use crate::strategy::{backtest_pnl, CostModel, PnlSeries, PositionSeries};

/// Allocation rule evaluated in the portfolio experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortfolioMethod {
    /// Equal weights under the constraint regime.
    Ew,
    /// Plug-in mean-variance.
    Mvo,
    /// Mean-variance with an ellipsoidal mean uncertainty set.
    Rpo,
    /// Percentile of bootstrapped utilities at level `α`; label
    /// `bumvo_<100α>`.
    BumvoPercentile(f64),
    /// Worst case over replicates in the `γ` box; label `bumvo_wc_<100γ>`.
    BumvoWorstcase(f64),
}

impl PortfolioMethod {
    /// The six rows of the standard comparison table.
    pub fn table_set() -> Vec<PortfolioMethod> {
        vec![
            PortfolioMethod::Ew,
            PortfolioMethod::Mvo,
            PortfolioMethod::Rpo,
            PortfolioMethod::BumvoPercentile(0.95),
            PortfolioMethod::BumvoPercentile(0.75),
            PortfolioMethod::BumvoPercentile(0.25),
        ]
    }

    fn needs_ensemble(&self) -> bool {
        matches!(
            self,
            PortfolioMethod::BumvoPercentile(_) | PortfolioMethod::BumvoWorstcase(_)
        )
    }
}

fn pct_label(x: f64) -> String {
    let p = x * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

impl fmt::Display for PortfolioMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PortfolioMethod::Ew => f.write_str("ew"),
            PortfolioMethod::Mvo => f.write_str("mvo"),
            PortfolioMethod::Rpo => f.write_str("rpo"),
            PortfolioMethod::BumvoPercentile(a) => write!(f, "bumvo_{}", pct_label(a)),
            PortfolioMethod::BumvoWorstcase(g) => write!(f, "bumvo_wc_{}", pct_label(g)),
        }
    }
}

impl FromStr for PortfolioMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let level = |p: &str| -> Result<f64> {
            let v = p
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad level in method `{s}`")))?
                / 100.0;
            if v > 0.0 && v < 1.0 {
                Ok(v)
            } else {
                Err(Error::Config(format!("level in method `{s}` must be in (0, 100)")))
            }
        };
        match s {
            "ew" => Ok(PortfolioMethod::Ew),
            "mvo" => Ok(PortfolioMethod::Mvo),
            "rpo" => Ok(PortfolioMethod::Rpo),
            _ => {
                if let Some(p) = s.strip_prefix("bumvo_wc_") {
                    Ok(PortfolioMethod::BumvoWorstcase(level(p)?))
                } else if let Some(p) = s.strip_prefix("bumvo_") {
                    Ok(PortfolioMethod::BumvoPercentile(level(p)?))
                } else {
                    Err(Error::Config(format!("unknown portfolio method `{s}`")))
                }
            }
        }
    }
}

impl Serialize for PortfolioMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PortfolioMethod {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Expanding-window backtest settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortfolioExperimentConfig {
    pub methods: Vec<PortfolioMethod>,
    pub constraints: ConstraintSet,
    /// Rows in the first estimation window.
    pub warmup: usize,
    pub bootstrap: ResampleConfig,
    pub lambda: f64,
    /// Significance level for the ellipsoid radius when `kappa2` is unset.
    pub rpo_alpha: f64,
    pub kappa2: Option<f64>,
    pub ascent: GradientAscentConfig,
    /// Proportional cost per unit of traded weight.
    pub tc: f64,
    /// Eigenvalue floor for covariance repair before every solve.
    pub psd_floor: f64,
    pub periods_per_year: usize,
    /// Annualized volatility of the rescaled wealth curves.
    pub vol_target: f64,
}

impl Default for PortfolioExperimentConfig {
    fn default() -> Self {
        Self {
            methods: PortfolioMethod::table_set(),
            constraints: ConstraintSet::long_only(),
            warmup: 252,
            bootstrap: ResampleConfig {
                count: 50,
                ..ResampleConfig::default()
            },
            lambda: 1.0,
            rpo_alpha: 0.05,
            kappa2: None,
            ascent: GradientAscentConfig::default(),
            tc: 0.0,
            psd_floor: 1e-10,
            periods_per_year: PERIODS_PER_YEAR,
            vol_target: 0.2,
        }
    }
}

impl PortfolioExperimentConfig {
    pub fn validate(&self, t: usize, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("no portfolio methods".into());
        }
        if self.warmup < 2 {
            return bad(format!("warmup {} must be at least 2", self.warmup));
        }
        if self.warmup + 2 > t {
            return bad(format!(
                "warmup {} leaves fewer than 2 out-of-sample periods in {t} rows",
                self.warmup
            ));
        }
        if !(self.tc >= 0.0 && self.tc.is_finite()) || !(self.psd_floor >= 0.0) {
            return bad("costs and the covariance floor must be nonnegative".into());
        }
        if !(self.rpo_alpha > 0.0 && self.rpo_alpha < 1.0) {
            return bad(format!("rpo_alpha {} outside (0, 1)", self.rpo_alpha));
        }
        if self.periods_per_year == 0 || !(self.vol_target > 0.0) {
            return bad("periods_per_year and vol_target must be positive".into());
        }
        for m in &self.methods {
            let p = match *m {
                PortfolioMethod::BumvoPercentile(a) => RobustnessParams {
                    alpha: a,
                    lambda: self.lambda,
                    ..Default::default()
                },
                PortfolioMethod::BumvoWorstcase(g) => RobustnessParams {
                    gamma: g,
                    lambda: self.lambda,
                    ..Default::default()
                },
                _ => RobustnessParams {
                    lambda: self.lambda,
                    kappa2: self.kappa2.unwrap_or(0.0),
                    ..Default::default()
                },
            };
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.ascent.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.constraints
            .check_feasible(d)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.methods.iter().any(PortfolioMethod::needs_ensemble) && self.bootstrap.count == 0 {
            return bad("bootstrap count must be positive".into());
        }
        Ok(())
    }
}

/// An optimizer failure at one rebalance; the previous weights were held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFailure {
    pub date: String,
    pub message: String,
}

/// One method's path through the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: PortfolioMethod,
    /// Row `s` was chosen with data up to `decision_dates[s]` and earns the
    /// next period's return.
    pub weights: DMatrix<f64>,
    pub pnl: PnlSeries,
    pub metrics: MetricReport,
    pub failures: Vec<StepFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioResult {
    pub assets: Vec<String>,
    pub decision_dates: Vec<String>,
    pub runs: Vec<MethodRun>,
}

/// Inputs shared by all methods at one rebalance.
struct StepInputs {
    plug_in: Result<MomentEstimate>,
    omega: Result<EstimationCovariance>,
    ensemble: Option<Result<ReplicateEnsemble>>,
}

fn share<T: Clone>(r: &Result<T>) -> Result<T> {
    r.as_ref().map(Clone::clone).map_err(|e| Error::Estimation(e.to_string()))
}

fn solve(
    method: PortfolioMethod,
    inputs: &StepInputs,
    prev: Option<&Weights>,
    kappa2: f64,
    cfg: &PortfolioExperimentConfig,
    d: usize,
) -> Result<Weights> {
    let c = &cfg.constraints;
    let ensemble = || -> Result<&ReplicateEnsemble> {
        match &inputs.ensemble {
            Some(Ok(e)) => Ok(e),
            Some(Err(e)) => Err(Error::Estimation(e.to_string())),
            None => Err(Error::Estimation("no bootstrap ensemble".into())),
        }
    };
    match method {
        PortfolioMethod::Ew => c.equal_weight(d),
        PortfolioMethod::Mvo => Ok(mvo_plugin(&share(&inputs.plug_in)?, cfg.lambda, c)?.weights),
        PortfolioMethod::Rpo => Ok(rpo(
            &share(&inputs.plug_in)?,
            &share(&inputs.omega)?,
            kappa2,
            cfg.lambda,
            c,
        )?
        .weights),
        PortfolioMethod::BumvoPercentile(alpha) => {
            let params = RobustnessParams {
                lambda: cfg.lambda,
                alpha,
                ..Default::default()
            };
            let warm: Vec<Weights> = prev.into_iter().cloned().collect();
            Ok(bumvo_percentile_with_starts(ensemble()?, &params, c, &cfg.ascent, &warm)?
                .solution
                .weights)
        }
        PortfolioMethod::BumvoWorstcase(gamma) => {
            Ok(bumvo_worstcase_with_config(ensemble()?, gamma, cfg.lambda, c, &cfg.ascent)?.weights)
        }
    }
}

/// Recursive expanding-window backtest.
///
/// At every row `t` from `warmup − 1` to `T − 2` each method is solved on rows
/// `0..=t` (covariances repaired first) and its weights earn the return of
/// row `t + 1`. A failed solve is recorded and the previous weights (equal
/// weights at the first step) are held instead.
pub fn run_portfolio_experiment(
    r: &ReturnPanel,
    cfg: &PortfolioExperimentConfig,
) -> Result<PortfolioResult> {
    let (t_len, d) = (r.len(), r.n_assets());
    cfg.validate(t_len, d)?;
    let kappa2 = match cfg.kappa2 {
        Some(k) => k,
        None => rpo_kappa(d, cfg.rpo_alpha)?,
    };
    let needs_ensemble = cfg.methods.iter().any(PortfolioMethod::needs_ensemble);
    let needs_omega = cfg.methods.contains(&PortfolioMethod::Rpo);
    let ew = cfg.constraints.equal_weight(d)?;

    let first = cfg.warmup - 1;
    let steps = t_len - 1 - first;
    let n_methods = cfg.methods.len();
    let mut weights = vec![DMatrix::zeros(steps, d); n_methods];
    let mut failures: Vec<Vec<StepFailure>> = vec![Vec::new(); n_methods];
    let mut prev: Vec<Option<Weights>> = vec![None; n_methods];
    let mut decision_dates = Vec::with_capacity(steps);

    for s in 0..steps {
        let t = first + s;
        let date = r.dates()[t].clone();
        let window = r.slice_rows(0..t + 1)?;
        let inputs = StepInputs {
            plug_in: sample_moments(&window).and_then(|m| psd_repair(&m, cfg.psd_floor)),
            omega: if needs_omega {
                estimation_covariance(&window)
            } else {
                Err(Error::Estimation("not computed".into()))
            },
            ensemble: needs_ensemble.then(|| {
                cfg.bootstrap
                    .spec_for(t + 1, t as u64)
                    .and_then(|spec| ensemble_moments(&window, &spec))
                    .and_then(|e| e.repaired(cfg.psd_floor))
            }),
        };
        let solved: Vec<Result<Weights>> = cfg
            .methods
            .par_iter()
            .zip(prev.par_iter())
            .map(|(m, p)| solve(*m, &inputs, p.as_ref(), kappa2, cfg, d))
            .collect();
        for (j, res) in solved.into_iter().enumerate() {
            let w = match res {
                Ok(w) => w,
                Err(e) => {
                    warn!("{} failed at {date}: {e}", cfg.methods[j]);
                    failures[j].push(StepFailure {
                        date: date.clone(),
                        message: e.to_string(),
                    });
                    prev[j].clone().unwrap_or_else(|| ew.clone())
                }
            };
            weights[j].set_row(s, &w.transpose());
            prev[j] = Some(w);
        }
        decision_dates.push(date);
    }

    let held = r.slice_rows(first..t_len)?;
    let cost = CostModel::uniform(cfg.tc, d);
    let mut runs = Vec::with_capacity(n_methods);
    for (j, (w, fails)) in weights.into_iter().zip(failures).enumerate() {
        // the final row is never held over a return; repeat it so it costs nothing
        let mut pos = w.clone().insert_row(steps, 0.0);
        let last = w.row(steps - 1).into_owned();
        pos.set_row(steps, &last);
        let pnl = backtest_pnl(&held, &PositionSeries { weights: pos }, &cost)?;
        let report = metrics(&pnl, cfg.periods_per_year)?;
        runs.push(MethodRun {
            method: cfg.methods[j],
            weights: w,
            pnl,
            metrics: report,
            failures: fails,
        });
    }
    Ok(PortfolioResult {
        assets: r.assets().to_vec(),
        decision_dates,
        runs,
    })
}
