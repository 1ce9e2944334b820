//! Backtest time-series momentum at a few lookbacks, with costs, and report
//! the usual metrics on the raw and volatility-targeted PnL.

use bootrobopt::evaluate::{metrics, vol_target};
use bootrobopt::harness::{generate_synthetic, SyntheticSpec};
use bootrobopt::strategy::{strategy_pnl, CostModel, TsmomParams};

fn main() -> bootrobopt::Result<()> {
    let r = generate_synthetic(&SyntheticSpec {
        t: 1500,
        d: 1,
        drift: vec![3e-4],
        ar: 0.05,
        ..Default::default()
    })?;
    let cost = CostModel::uniform(5e-4, 1);
    println!("lookback  Sharpe   MaxDD%  MaxDD% at 10% vol");
    for lookback in [5, 21, 63, 252] {
        let pnl = strategy_pnl(&r, &TsmomParams::new(lookback), &cost)?;
        let m = metrics(&pnl, 252)?;
        let scaled = metrics(&vol_target(&pnl, 0.10, 252)?, 252)?;
        println!(
            "{lookback:>8}  {:>6.3}  {:>6.2}  {:>6.2}",
            m.sharpe.unwrap_or(f64::NAN),
            m.max_dd,
            scaled.max_dd,
        );
    }
    Ok(())
}
