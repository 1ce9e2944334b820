//! Pick a momentum lookback per asset on the training window with several
//! selection rules and see how each choice holds up on the test window.

use bootrobopt::evaluate::SelectionRule;
use bootrobopt::harness::{
    generate_synthetic, run_tuning_experiment, SyntheticSpec, TuningExperimentConfig,
};

fn main() -> bootrobopt::Result<()> {
    let spec = SyntheticSpec {
        d: 4,
        ..SyntheticSpec::tuning_default()
    };
    let r = generate_synthetic(&spec)?;
    let cfg = TuningExperimentConfig {
        rules: vec![
            SelectionRule::NpbPercentile(0.5),
            SelectionRule::Erm,
            SelectionRule::Cb1,
        ],
        ..Default::default()
    };
    let result = run_tuning_experiment(&r, &cfg)?;

    for asset in &result.assets {
        for o in &asset.outcomes {
            println!(
                "{:<4} {:<7} lookback {:>3}  Sharpe train {:>7.3} test {:>7.3}",
                asset.asset,
                o.rule.to_string(),
                o.selected.lookback,
                o.report.train.sharpe.unwrap_or(f64::NAN),
                o.report.test.sharpe.unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
