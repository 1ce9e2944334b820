//! Performance metrics, generalization gaps, hyperparameter selection rules
//! and cross-asset confidence intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::optimize::{percentile, percentile_index};
use crate::special::normal_quantile;
use crate::stats::{mean, sample_std};
use crate::strategy::{PnlSeries, TsmomParams, UtilityMap};

/// Trading days per year.
pub const PERIODS_PER_YEAR: usize = 252;

/// Serializes `None` as the string `"undef"`.
fn undef_or<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("undef"),
    }
}

fn undef_or_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Str(String),
    }
    match Cell::deserialize(d)? {
        Cell::Num(x) => Ok(Some(x)),
        Cell::Str(s) if s == "undef" => Ok(None),
        Cell::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"undef\", got {s:?}"))),
    }
}

/// Formats a metric to `decimals` places, `undef` for a sentinel.
pub fn format_metric(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.decimals$}"),
        Some(x) => x.to_string(),
        None => "undef".to_string(),
    }
}

/// Summary statistics of a return series.
///
/// Returns and drawdowns are in percent; the ratios are annualized and
/// dimensionless. Undefined ratios are `None` and serialize as `"undef"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub expected_return: f64,
    pub std: f64,
    #[serde(serialize_with = "undef_or", deserialize_with = "undef_or_de")]
    pub sharpe: Option<f64>,
    #[serde(serialize_with = "undef_or", deserialize_with = "undef_or_de")]
    pub sortino: Option<f64>,
    pub avg_dd: f64,
    pub max_dd: f64,
    pub pct_positive: f64,
}

impl MetricReport {
    /// CSV header in field order.
    pub const HEADER: [&'static str; 7] = [
        "expected_return",
        "std",
        "sharpe",
        "sortino",
        "avg_dd",
        "max_dd",
        "pct_positive",
    ];

    /// One CSV row in [`Self::HEADER`] order.
    pub fn csv_row(&self, decimals: usize) -> Vec<String> {
        vec![
            format_metric(Some(self.expected_return), decimals),
            format_metric(Some(self.std), decimals),
            format_metric(self.sharpe, decimals),
            format_metric(self.sortino, decimals),
            format_metric(Some(self.avg_dd), decimals),
            format_metric(Some(self.max_dd), decimals),
            format_metric(Some(self.pct_positive), decimals),
        ]
    }
}

/// Drawdowns `W_t / max_{s≤t} W_s − 1` at every point after the initial one.
pub fn drawdowns(wealth: &[f64]) -> Vec<f64> {
    let mut peak = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(wealth.len().saturating_sub(1));
    for (i, &w) in wealth.iter().enumerate() {
        peak = peak.max(w);
        if i > 0 {
            out.push(w / peak - 1.0);
        }
    }
    out
}

/// Deepest drawdown as a nonpositive fraction; 0 for fewer than two points.
pub fn max_drawdown(wealth: &[f64]) -> f64 {
    drawdowns(wealth).into_iter().fold(0.0, f64::min)
}

/// Annualized Sharpe ratio used as a tuning utility: a flat series scores 0
/// and a riskless nonzero mean scores ±∞.
pub fn sharpe_utility(values: &[f64], periods_per_year: usize) -> f64 {
    let m = mean(values);
    let s = sample_std(values);
    if s > 0.0 {
        m / s * (periods_per_year as f64).sqrt()
    } else if m == 0.0 || m.is_nan() {
        0.0
    } else {
        m.signum() * f64::INFINITY
    }
}

/// Annualized metrics of `p`.
pub fn metrics(p: &PnlSeries, periods_per_year: usize) -> Result<MetricReport> {
    let r = &p.values;
    if r.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "{} return observations; at least 2 required",
            r.len()
        )));
    }
    if periods_per_year == 0 {
        return Err(Error::InvalidParameter("periods per year must be positive".into()));
    }
    let ppy = periods_per_year as f64;
    let m = mean(r);
    let s = sample_std(r);
    let downside = (r.iter().map(|x| x.min(0.0).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
    let dd = drawdowns(&p.wealth);
    Ok(MetricReport {
        expected_return: 100.0 * m * ppy,
        std: 100.0 * s * ppy.sqrt(),
        sharpe: (s > 0.0).then(|| m / s * ppy.sqrt()),
        sortino: (downside > 0.0).then(|| m / downside * ppy.sqrt()),
        avg_dd: 100.0 * mean(&dd),
        max_dd: 100.0 * dd.iter().copied().fold(0.0, f64::min),
        pct_positive: 100.0 * r.iter().filter(|&&x| x > 0.0).count() as f64 / r.len() as f64,
    })
}

/// Per-metric differences `test − train`; `None` where either side is
/// undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricGap {
    pub expected_return: f64,
    pub std: f64,
    #[serde(serialize_with = "undef_or", deserialize_with = "undef_or_de")]
    pub sharpe: Option<f64>,
    #[serde(serialize_with = "undef_or", deserialize_with = "undef_or_de")]
    pub sortino: Option<f64>,
    pub avg_dd: f64,
    pub max_dd: f64,
    pub pct_positive: f64,
    /// `|test| − |train|` for the drawdowns: positive means deeper test
    /// drawdowns.
    pub avg_dd_abs: f64,
    pub max_dd_abs: f64,
}

/// Train and test metrics with their gap. A negative Sharpe gap is
/// out-of-sample disappointment; a negative MaxDD gap is a deeper test
/// drawdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub train: MetricReport,
    pub test: MetricReport,
    pub gap: MetricGap,
}

pub fn gap(train: &MetricReport, test: &MetricReport) -> GapReport {
    let diff = |a: Option<f64>, b: Option<f64>| Some(b? - a?);
    GapReport {
        train: *train,
        test: *test,
        gap: MetricGap {
            expected_return: test.expected_return - train.expected_return,
            std: test.std - train.std,
            sharpe: diff(train.sharpe, test.sharpe),
            sortino: diff(train.sortino, test.sortino),
            avg_dd: test.avg_dd - train.avg_dd,
            max_dd: test.max_dd - train.max_dd,
            pct_positive: test.pct_positive - train.pct_positive,
            avg_dd_abs: test.avg_dd.abs() - train.avg_dd.abs(),
            max_dd_abs: test.max_dd.abs() - train.max_dd.abs(),
        },
    }
}

/// How a lookback is chosen from bootstrapped utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// Highest `α` percentile of the replicate utilities.
    NpbPercentile(f64),
    /// Highest in-sample utility; the utility list holds the unresampled
    /// value at index 0.
    Erm,
    /// Highest mean over asset-level bootstrap replicates.
    Cb1,
    /// Highest mean over bootstrapped realized strategy returns.
    Cb2,
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::NpbPercentile(a) if !(a > 0.0 && a < 1.0) => Err(Error::InvalidParameter(
                format!("percentile level {a} outside (0, 1)"),
            )),
            _ => Ok(()),
        }
    }

    /// Percentile rules at 10%, 20%, ..., 90%.
    pub fn npb_grid() -> Vec<SelectionRule> {
        (1..=9).map(|k| SelectionRule::NpbPercentile(k as f64 / 10.0)).collect()
    }

    /// The percentile grid followed by `erm`, `cb1` and `cb2`.
    pub fn all() -> Vec<SelectionRule> {
        let mut v = Self::npb_grid();
        v.extend([SelectionRule::Erm, SelectionRule::Cb1, SelectionRule::Cb2]);
        v
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SelectionRule::NpbPercentile(a) => {
                let pct = a * 100.0;
                if (pct - pct.round()).abs() < 1e-9 {
                    write!(f, "npb_{}", pct.round() as i64)
                } else {
                    write!(f, "npb_{pct}")
                }
            }
            SelectionRule::Erm => f.write_str("erm"),
            SelectionRule::Cb1 => f.write_str("cb1"),
            SelectionRule::Cb2 => f.write_str("cb2"),
        }
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rule = match s {
            "erm" => SelectionRule::Erm,
            "cb1" => SelectionRule::Cb1,
            "cb2" => SelectionRule::Cb2,
            _ => {
                let pct = s
                    .strip_prefix("npb_")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown selection rule `{s}`")))?;
                SelectionRule::NpbPercentile(pct / 100.0)
            }
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl Serialize for SelectionRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SelectionRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Score of one parameter's utility list under `rule`.
fn score(u: &[f64], rule: SelectionRule) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::InvalidParameter("empty utility list".into()));
    }
    match rule {
        SelectionRule::NpbPercentile(a) => percentile(u, a),
        SelectionRule::Erm => Ok(u[0]),
        SelectionRule::Cb1 | SelectionRule::Cb2 => Ok(mean(u)),
    }
}

/// Orders candidates by lookback, then forecast scale, for tie-breaking.
fn smaller(a: &TsmomParams, b: &TsmomParams) -> bool {
    (a.lookback, a.forecast_scale) < (b.lookback, b.forecast_scale)
}

/// Parameter maximizing the rule's score; ties go to the smallest lookback.
pub fn select_theta(utilities: &UtilityMap, rule: SelectionRule) -> Result<TsmomParams> {
    rule.validate()?;
    let mut best: Option<(f64, TsmomParams)> = None;
    for (p, u) in utilities {
        let s = score(u, rule)?;
        best = match best {
            None => Some((s, *p)),
            Some((bs, bp)) => {
                if s > bs || (s == bs && smaller(p, &bp)) || (bs.is_nan() && !s.is_nan()) {
                    Some((s, *p))
                } else {
                    Some((bs, bp))
                }
            }
        };
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::InvalidParameter("empty utility map".into()))
}

/// Literal reading of the strategy-selection pseudocode: average each
/// parameter's replicate utilities, then return the parameter whose average
/// sits at the type-1 `α` percentile across parameters. Kept for comparison
/// with [`select_theta`].
pub fn select_theta_literal(utilities: &UtilityMap, alpha: f64) -> Result<TsmomParams> {
    if utilities.is_empty() {
        return Err(Error::InvalidParameter("empty utility map".into()));
    }
    let means = utilities
        .iter()
        .map(|(_, u)| score(u, SelectionRule::Cb1))
        .collect::<Result<Vec<_>>>()?;
    let target = means[percentile_index(&means, alpha)?];
    utilities
        .iter()
        .zip(&means)
        .filter(|(_, m)| m.total_cmp(&target).is_eq())
        .map(|((p, _), _)| *p)
        .reduce(|a, b| if smaller(&b, &a) { b } else { a })
        .ok_or_else(|| Error::InvalidParameter("empty utility map".into()))
}

/// Gaussian confidence interval for a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// `mean ± z·s/√n` with `z` the `(1 + level)/2` normal quantile and `s` the
/// sample standard deviation.
pub fn gaussian_ci(values: &[f64], level: f64) -> Result<ConfidenceInterval> {
    if values.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "confidence interval from {} values",
            values.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level} outside (0, 1)")));
    }
    let m = mean(values);
    let half = normal_quantile(0.5 * (1.0 + level)) * sample_std(values) / (values.len() as f64).sqrt();
    Ok(ConfidenceInterval {
        mean: m,
        lo: m - half,
        hi: m + half,
        n: values.len(),
    })
}

/// Rescales returns so the ex-post annualized volatility equals
/// `target_annual`, then recompounds wealth.
pub fn vol_target(p: &PnlSeries, target_annual: f64, periods_per_year: usize) -> Result<PnlSeries> {
    let s = sample_std(&p.values) * (periods_per_year as f64).sqrt();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::UndefinedMetric("zero realized volatility".into()));
    }
    let k = target_annual / s;
    PnlSeries::new(p.dates.clone(), p.values.iter().map(|r| r * k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pnl(v: &[f64]) -> PnlSeries {
        PnlSeries::from_values(v.to_vec())
    }

    #[test]
    fn alternating_returns() {
        let m = metrics(&pnl(&[0.01, -0.01, 0.01, -0.01]), 252).unwrap();
        assert_relative_eq!(m.expected_return, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.sharpe.unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(m.pct_positive, 50.0);
        // the compounded per-period rate is slightly negative
        let geometric = pnl(&[0.01, -0.01]).terminal().sqrt() - 1.0;
        assert_relative_eq!(100.0 * geometric, -0.005, epsilon = 1e-6);
    }

    #[test]
    fn monotone_gains_have_no_drawdown() {
        let m = metrics(&pnl(&[0.01, 0.02, 0.005]), 252).unwrap();
        assert_eq!((m.max_dd, m.avg_dd, m.pct_positive), (0.0, 0.0, 100.0));
        assert_eq!(m.sortino, None);
    }

    #[test]
    fn drawdown_by_hand() {
        let p = pnl(&[0.10, -0.50]);
        assert_relative_eq!(p.wealth[2], 0.55, epsilon = 1e-15);
        let m = metrics(&p, 252).unwrap();
        assert_relative_eq!(m.max_dd, -50.0, epsilon = 1e-12);
        assert_relative_eq!(m.avg_dd, -25.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_series_sentinels() {
        let m = metrics(&pnl(&[0.0, 0.0, 0.0]), 252).unwrap();
        assert_eq!((m.sharpe, m.sortino), (None, None));
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"sharpe\":\"undef\""));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.csv_row(2)[2], "undef");
        assert!(metrics(&pnl(&[0.1]), 252).is_err());
    }

    #[test]
    fn gaps() {
        let mut train = metrics(&pnl(&[0.01, -0.005, 0.02]), 252).unwrap();
        let same = gap(&train, &train);
        assert_eq!(same.gap.sharpe, Some(0.0));
        assert_eq!(same.gap.max_dd, 0.0);
        train.sharpe = Some(0.6);
        train.max_dd = -15.0;
        let mut test = train;
        test.sharpe = Some(-0.4);
        test.max_dd = -20.0;
        let g = gap(&train, &test);
        assert_relative_eq!(g.gap.sharpe.unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(g.gap.max_dd, -5.0);
        assert_eq!(g.gap.max_dd_abs, 5.0);
        test.sharpe = None;
        assert_eq!(gap(&train, &test).gap.sharpe, None);
    }

    #[test]
    fn selection_by_hand() {
        let a = TsmomParams::new(21);
        let b = TsmomParams::new(42);
        let map: UtilityMap = vec![(a, vec![0.0, 0.0, 10.0]), (b, vec![3.0, 3.0, 3.0])];
        assert_eq!(select_theta(&map, SelectionRule::NpbPercentile(0.25)).unwrap(), b);
        assert_eq!(select_theta(&map, SelectionRule::Cb1).unwrap(), a);
        assert_eq!(select_theta(&map, SelectionRule::Erm).unwrap(), b);
        let tied: UtilityMap = vec![(b, vec![1.0, 2.0]), (a, vec![1.0, 2.0])];
        for rule in SelectionRule::all() {
            assert_eq!(select_theta(&tied, rule).unwrap(), a);
        }
        assert!(select_theta(&vec![(a, vec![])], SelectionRule::Erm).is_err());
    }

    #[test]
    fn literal_reading_picks_by_mean_rank() {
        let map: UtilityMap = (1..=4)
            .map(|k| (TsmomParams::new(k * 10), vec![k as f64, k as f64 + 1.0]))
            .collect();
        assert_eq!(select_theta_literal(&map, 0.5).unwrap().lookback, 20);
        assert_eq!(select_theta_literal(&map, 0.9).unwrap().lookback, 40);
    }

    #[test]
    fn rule_labels_round_trip() {
        for rule in SelectionRule::all() {
            let s = rule.to_string();
            assert_eq!(s.parse::<SelectionRule>().unwrap(), rule);
        }
        assert_eq!(SelectionRule::NpbPercentile(0.1).to_string(), "npb_10");
        assert!("npb_0".parse::<SelectionRule>().is_err());
        assert!("best".parse::<SelectionRule>().is_err());
    }

    #[test]
    fn confidence_intervals() {
        let c = gaussian_ci(&[2.0, 2.0, 2.0], 0.95).unwrap();
        assert_eq!((c.mean, c.lo, c.hi), (2.0, 2.0, 2.0));
        let c = gaussian_ci(&[0.0, 2.0], 0.95).unwrap();
        assert_relative_eq!(c.hi - c.mean, 1.959_963_984_540_054, epsilon = 1e-9);
        let wide = gaussian_ci(&[0.0, 2.0], 0.99).unwrap();
        assert!(wide.hi > c.hi && wide.lo < c.lo);
        assert!(gaussian_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn vol_targeting() {
        let p = pnl(&[0.01, -0.02, 0.015, 0.003, -0.007]);
        let v = vol_target(&p, 0.2, 252).unwrap();
        assert_relative_eq!(sample_std(&v.values) * 252f64.sqrt(), 0.2, epsilon = 1e-12);
        let again = vol_target(&v, 0.2, 252).unwrap();
        for (a, b) in again.values.iter().zip(&v.values) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert!(vol_target(&pnl(&[0.01, 0.01]), 0.2, 252).is_err());
    }
}
