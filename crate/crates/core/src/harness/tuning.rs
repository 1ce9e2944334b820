use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ResampleConfig;
use crate::error::{Error, Result};
use crate::evaluate::{
    gap, gaussian_ci, metrics, select_theta, select_theta_literal, GapReport, MetricReport,
    SelectionRule, PERIODS_PER_YEAR,
};
use crate::panel::{split, ReturnPanel, SplitSpec};
use crate::resample::{generate_all, IndexPath};
use crate::strategy::{
    resampled_series_utilities, strategy_pnl, strategy_utilities_on_paths, CostModel, TsmomParams,
    UtilityKind, UtilityMap, DEFAULT_LOOKBACKS, DEFAULT_TC,
};

/// Per-asset momentum tuning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningExperimentConfig {
    pub lookbacks: Vec<usize>,
    pub split: SplitSpec,
    pub rules: Vec<SelectionRule>,
    pub utility: UtilityKind,
    pub bootstrap: ResampleConfig,
    /// Proportional cost per unit of traded weight, all assets.
    pub tc: f64,
    pub charge_entry: bool,
    pub periods_per_year: usize,
    pub ci_level: f64,
    /// Select percentile rules by ranking parameter-level mean utilities
    /// instead of maximizing each parameter's replicate percentile.
    pub literal_selection: bool,
}

impl Default for TuningExperimentConfig {
    fn default() -> Self {
        Self {
            lookbacks: DEFAULT_LOOKBACKS.to_vec(),
            split: SplitSpec::default(),
            rules: SelectionRule::all(),
            utility: UtilityKind::Sharpe,
            bootstrap: ResampleConfig {
                count: 200,
                ..ResampleConfig::default()
            },
            tc: DEFAULT_TC,
            charge_entry: true,
            periods_per_year: PERIODS_PER_YEAR,
            ci_level: 0.95,
            literal_selection: false,
        }
    }
}

impl TuningExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lookbacks.is_empty() || self.lookbacks.contains(&0) {
            return bad("lookbacks must be a nonempty list of positive integers".into());
        }
        if self.rules.is_empty() {
            return bad("no selection rules".into());
        }
        for r in &self.rules {
            r.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad(format!("train fraction {} outside (0, 1)", self.split.train_fraction));
        }
        if self.bootstrap.count == 0 {
            return bad("bootstrap count must be positive".into());
        }
        if !(self.tc >= 0.0 && self.tc.is_finite()) {
            return bad(format!("transaction cost {} must be nonnegative", self.tc));
        }
        if self.periods_per_year == 0 || !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("periods_per_year must be positive and ci_level in (0, 1)".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<TsmomParams> {
        self.lookbacks.iter().map(|&l| TsmomParams::new(l)).collect()
    }
}

/// Selected parameter and its train/test evaluation under one rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleOutcome {
    pub rule: SelectionRule,
    pub selected: TsmomParams,
    pub report: GapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetTuning {
    pub asset: String,
    /// Why the asset was skipped, if it was.
    pub skipped: Option<String>,
    pub outcomes: Vec<RuleOutcome>,
}

/// Cross-asset interval for one rule, segment and metric. The bounds are
/// `None` when fewer than two assets have the metric defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiRow {
    pub rule: SelectionRule,
    pub segment: &'static str,
    pub metric: &'static str,
    pub n: usize,
    pub mean: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub assets: Vec<AssetTuning>,
    pub ci: Vec<CiRow>,
}

/// Utilities needed by the configured rules, built lazily per construction.
struct RuleInputs {
    erm: Option<UtilityMap>,
    asset_level: Option<UtilityMap>,
    realized: Option<UtilityMap>,
}

fn tune_asset(
    r: &ReturnPanel,
    k: usize,
    cfg: &TuningExperimentConfig,
    grid: &[TsmomParams],
) -> Result<AssetTuning> {
    let series = r.asset(k);
    let asset = r.assets()[k].clone();
    let (train, _) = split(&series, cfg.split)?;
    let max_lb = cfg.lookbacks.iter().copied().max().unwrap_or(0);
    if train.len() <= max_lb + 2 {
        return Ok(AssetTuning {
            asset,
            skipped: Some(format!(
                "train segment of {} rows is not longer than max lookback {max_lb} + 2",
                train.len()
            )),
            outcomes: Vec::new(),
        });
    }
    let cost = CostModel {
        tc: vec![cfg.tc],
        charge_entry: cfg.charge_entry,
    };
    let ppy = cfg.periods_per_year;
    let wants = |f: fn(&SelectionRule) -> bool| cfg.rules.iter().any(f);
    let asset_tag = 2 * k as u64;

    let inputs = RuleInputs {
        erm: if wants(|r| matches!(r, SelectionRule::Erm)) {
            let id = [IndexPath::identity(train.len())];
            Some(strategy_utilities_on_paths(&train, grid, &id, &cost, cfg.utility, ppy)?)
        } else {
            None
        },
        asset_level: if wants(|r| matches!(r, SelectionRule::NpbPercentile(_) | SelectionRule::Cb1)) {
            let paths = generate_all(&cfg.bootstrap.spec_for(train.len(), asset_tag)?, train.len())?;
            Some(strategy_utilities_on_paths(&train, grid, &paths, &cost, cfg.utility, ppy)?)
        } else {
            None
        },
        realized: if wants(|r| matches!(r, SelectionRule::Cb2)) {
            // one in-sample run per parameter, then resample its realized returns
            let n = train.len() - 1;
            let paths = generate_all(&cfg.bootstrap.spec_for(n, asset_tag + 1)?, n)?;
            let mut map = Vec::with_capacity(grid.len());
            for p in grid {
                let pnl = strategy_pnl(&train, p, &cost)?;
                map.push((*p, resampled_series_utilities(&pnl.values, &paths, cfg.utility, ppy)));
            }
            Some(map)
        } else {
            None
        },
    };

    let n_train = train.len();
    let mut outcomes = Vec::with_capacity(cfg.rules.len());
    for &rule in &cfg.rules {
        let selected = match rule {
            SelectionRule::Erm => select_theta(inputs.erm.as_ref().expect("built above"), rule)?,
            SelectionRule::Cb2 => select_theta(inputs.realized.as_ref().expect("built above"), rule)?,
            SelectionRule::Cb1 => select_theta(inputs.asset_level.as_ref().expect("built above"), rule)?,
            SelectionRule::NpbPercentile(a) => {
                let u = inputs.asset_level.as_ref().expect("built above");
                if cfg.literal_selection {
                    select_theta_literal(u, a)?
                } else {
                    select_theta(u, rule)?
                }
            }
        };
        let train_report = metrics(&strategy_pnl(&train, &selected, &cost)?, ppy)?;
        // test periods come from the full-history run so positions at the
        // start of the test segment use only train data
        let full = strategy_pnl(&series, &selected, &cost)?;
        let test_pnl = full.slice(n_train - 1..full.len())?;
        let test_report = metrics(&test_pnl, ppy)?;
        outcomes.push(RuleOutcome {
            rule,
            selected,
            report: gap(&train_report, &test_report),
        });
    }
    Ok(AssetTuning {
        asset,
        skipped: None,
        outcomes,
    })
}

type Extract = fn(&GapReport) -> Option<f64>;

fn metric_table() -> Vec<(&'static str, &'static str, Extract)> {
    fn seg(m: &MetricReport, name: &str) -> Option<f64> {
        match name {
            "expected_return" => Some(m.expected_return),
            "std" => Some(m.std),
            "sharpe" => m.sharpe,
            "sortino" => m.sortino,
            "avg_dd" => Some(m.avg_dd),
            "max_dd" => Some(m.max_dd),
            "pct_positive" => Some(m.pct_positive),
            _ => unreachable!(),
        }
    }
    macro_rules! three {
        ($name:literal, $gap:expr) => {
            [
                ("train", $name, (|g: &GapReport| seg(&g.train, $name)) as Extract),
                ("test", $name, (|g: &GapReport| seg(&g.test, $name)) as Extract),
                ("gap", $name, $gap as Extract),
            ]
        };
    }
    let mut v = Vec::new();
    v.extend(three!("expected_return", |g: &GapReport| Some(g.gap.expected_return)));
    v.extend(three!("std", |g: &GapReport| Some(g.gap.std)));
    v.extend(three!("sharpe", |g: &GapReport| g.gap.sharpe));
    v.extend(three!("sortino", |g: &GapReport| g.gap.sortino));
    v.extend(three!("avg_dd", |g: &GapReport| Some(g.gap.avg_dd)));
    v.extend(three!("max_dd", |g: &GapReport| Some(g.gap.max_dd)));
    v.extend(three!("pct_positive", |g: &GapReport| Some(g.gap.pct_positive)));
    v.push(("gap", "avg_dd_abs", |g: &GapReport| Some(g.gap.avg_dd_abs)));
    v.push(("gap", "max_dd_abs", |g: &GapReport| Some(g.gap.max_dd_abs)));
    v
}

/// Runs the tuning experiment on every asset of `r` independently.
///
/// For each asset the train segment yields in-sample utilities (`erm`),
/// asset-level bootstrap utilities shared by the percentile rules and `cb1`,
/// and resampled realized-return utilities (`cb2`). Each rule's choice is
/// evaluated on train and on the test periods, and the per-rule metrics are
/// summarized across assets with Gaussian intervals.
pub fn run_tuning_experiment(r: &ReturnPanel, cfg: &TuningExperimentConfig) -> Result<TuningResult> {
    cfg.validate()?;
    let grid = cfg.grid();
    let assets: Vec<AssetTuning> = (0..r.n_assets())
        .into_par_iter()
        .map(|k| tune_asset(r, k, cfg, &grid))
        .collect::<Result<_>>()?;

    let mut ci = Vec::new();
    for &rule in &cfg.rules {
        let reports: Vec<&GapReport> = assets
            .iter()
            .flat_map(|a| a.outcomes.iter())
            .filter(|o| o.rule == rule)
            .map(|o| &o.report)
            .collect();
        for (segment, metric, f) in metric_table() {
            let values: Vec<f64> = reports.iter().filter_map(|g| f(g)).filter(|v| v.is_finite()).collect();
            let row = match gaussian_ci(&values, cfg.ci_level) {
                Ok(c) => CiRow {
                    rule,
                    segment,
                    metric,
                    n: values.len(),
                    mean: Some(c.mean),
                    lo: Some(c.lo),
                    hi: Some(c.hi),
                },
                Err(_) => CiRow {
                    rule,
                    segment,
                    metric,
                    n: values.len(),
                    mean: None,
                    lo: None,
                    hi: None,
                },
            };
            ci.push(row);
        }
    }
    Ok(TuningResult { assets, ci })
}
