//! CSV and JSON writers for experiment results.

use std::fs::File;
use std::path::Path;

use serde_json::json;

use super::portfolio::{PortfolioExperimentConfig, PortfolioResult};
use super::tuning::{TuningExperimentConfig, TuningResult};
use crate::error::{Error, Result};
use crate::evaluate::{format_metric, vol_target, MetricReport};

/// Column schema of the portfolio comparison table.
pub const PORTFOLIO_METRICS_HEADER: [&str; 7] =
    ["method", "E[R]", "Std(R)", "Sharpe", "Sortino", "AvgDD", "MaxDD"];

const TABLE_DECIMALS: usize = 2;
const RATIO_DECIMALS: usize = 4;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Percent-valued metrics get two decimals, ratios four.
fn decimals_for(metric: &str) -> usize {
    match metric {
        "sharpe" | "sortino" => RATIO_DECIMALS,
        _ => TABLE_DECIMALS,
    }
}

fn table_row(m: &MetricReport) -> [String; 6] {
    let f = |v: Option<f64>| format_metric(v, TABLE_DECIMALS);
    [
        f(Some(m.expected_return)),
        f(Some(m.std)),
        f(m.sharpe),
        f(m.sortino),
        f(Some(m.avg_dd)),
        f(Some(m.max_dd)),
    ]
}

/// Writes `metrics.csv`, `weights.csv`, `pnl_<method>.csv`, `summary.json`
/// and, when any rebalance failed, `failures.csv` into `dir`.
pub fn write_portfolio_outputs(
    dir: &Path,
    result: &PortfolioResult,
    cfg: &PortfolioExperimentConfig,
) -> Result<()> {
    let mut w = writer(dir, "metrics.csv")?;
    w.write_record(PORTFOLIO_METRICS_HEADER)?;
    for run in &result.runs {
        let mut rec = vec![run.method.to_string()];
        rec.extend(table_row(&run.metrics));
        w.write_record(&rec)?;
    }
    finish(w)?;

    let mut w = writer(dir, "weights.csv")?;
    let mut header = vec!["date".to_string(), "method".to_string()];
    header.extend(result.assets.iter().cloned());
    w.write_record(&header)?;
    for run in &result.runs {
        for (s, date) in result.decision_dates.iter().enumerate() {
            let mut rec = vec![date.clone(), run.method.to_string()];
            rec.extend(run.weights.row(s).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    finish(w)?;

    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for run in &result.runs {
        let scaled = vol_target(&run.pnl, cfg.vol_target, cfg.periods_per_year).ok();
        let mut w = writer(dir, &format!("pnl_{}.csv", run.method))?;
        w.write_record(["date", "return", "wealth", "wealth_vol_target"])?;
        for (i, date) in run.pnl.dates.iter().enumerate() {
            let vt = scaled
                .as_ref()
                .map_or_else(|| "undef".to_string(), |p| p.wealth[i + 1].to_string());
            w.write_record([
                date.clone(),
                run.pnl.values[i].to_string(),
                run.pnl.wealth[i + 1].to_string(),
                vt,
            ])?;
        }
        finish(w)?;
        for f in &run.failures {
            failures.push([run.method.to_string(), f.date.clone(), f.message.clone()]);
        }
        summary.push(json!({
            "method": run.method,
            "metrics": run.metrics,
            "failures": run.failures.len(),
        }));
    }
    if !failures.is_empty() {
        let mut w = writer(dir, "failures.csv")?;
        w.write_record(["method", "date", "message"])?;
        for f in failures {
            w.write_record(f)?;
        }
        finish(w)?;
    }
    write_json(
        dir,
        "summary.json",
        &json!({
            "assets": result.assets,
            "first_decision": result.decision_dates.first(),
            "rebalances": result.decision_dates.len(),
            "methods": summary,
        }),
    )
}

/// Writes `selection.csv` (one column per rule), `gaps.csv`, `ci.csv`,
/// `metrics.csv` and, when assets were skipped, `skipped.csv` into `dir`.
///
/// Gaps are `test − train`: a negative Sharpe gap is out-of-sample
/// disappointment and a negative MaxDD gap a deeper test drawdown.
/// `max_dd_abs_gap` is `|test| − |train|`.
pub fn write_tuning_outputs(
    dir: &Path,
    result: &TuningResult,
    cfg: &TuningExperimentConfig,
) -> Result<()> {
    let mut w = writer(dir, "selection.csv")?;
    let mut header = vec!["asset".to_string()];
    header.extend(cfg.rules.iter().map(|r| r.to_string()));
    w.write_record(&header)?;
    for a in result.assets.iter().filter(|a| a.skipped.is_none()) {
        let mut rec = vec![a.asset.clone()];
        rec.extend(a.outcomes.iter().map(|o| o.selected.lookback.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)?;

    let r4 = |v: Option<f64>| format_metric(v, RATIO_DECIMALS);
    let r2 = |v: Option<f64>| format_metric(v, TABLE_DECIMALS);
    let mut w = writer(dir, "gaps.csv")?;
    w.write_record([
        "asset",
        "rule",
        "lookback",
        "sharpe_train",
        "sharpe_test",
        "sharpe_gap",
        "max_dd_train",
        "max_dd_test",
        "max_dd_gap",
        "max_dd_abs_gap",
    ])?;
    for a in &result.assets {
        for o in &a.outcomes {
            let g = &o.report;
            w.write_record([
                a.asset.clone(),
                o.rule.to_string(),
                o.selected.lookback.to_string(),
                r4(g.train.sharpe),
                r4(g.test.sharpe),
                r4(g.gap.sharpe),
                r2(Some(g.train.max_dd)),
                r2(Some(g.test.max_dd)),
                r2(Some(g.gap.max_dd)),
                r2(Some(g.gap.max_dd_abs)),
            ])?;
        }
    }
    finish(w)?;

    let mut w = writer(dir, "ci.csv")?;
    w.write_record(["rule", "segment", "metric", "n", "mean", "lo", "hi"])?;
    for c in &result.ci {
        let d = decimals_for(c.metric);
        w.write_record([
            c.rule.to_string(),
            c.segment.to_string(),
            c.metric.to_string(),
            c.n.to_string(),
            format_metric(c.mean, d),
            format_metric(c.lo, d),
            format_metric(c.hi, d),
        ])?;
    }
    finish(w)?;

    let mut w = writer(dir, "metrics.csv")?;
    w.write_record([
        "asset", "rule", "segment", "lookback", "E[R]", "Std(R)", "Sharpe", "Sortino", "AvgDD",
        "MaxDD", "%Pos",
    ])?;
    for a in &result.assets {
        for o in &a.outcomes {
            for (segment, m) in [("train", &o.report.train), ("test", &o.report.test)] {
                let mut rec = vec![
                    a.asset.clone(),
                    o.rule.to_string(),
                    segment.to_string(),
                    o.selected.lookback.to_string(),
                ];
                rec.extend(table_row(m));
                rec.push(r2(Some(m.pct_positive)));
                w.write_record(&rec)?;
            }
        }
    }
    finish(w)?;

    let skipped: Vec<_> = result
        .assets
        .iter()
        .filter_map(|a| a.skipped.as_ref().map(|why| [a.asset.clone(), why.clone()]))
        .collect();
    if !skipped.is_empty() {
        let mut w = writer(dir, "skipped.csv")?;
        w.write_record(["asset", "reason"])?;
        for s in skipped {
            w.write_record(s)?;
        }
        finish(w)?;
    }
    Ok(())
}
