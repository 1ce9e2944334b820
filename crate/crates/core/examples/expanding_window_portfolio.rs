//! Rebalance several optimizers on an expanding window and write the
//! comparison tables to a directory.

use bootrobopt::harness::{
    generate_synthetic, run_portfolio_experiment, write_portfolio_outputs,
    PortfolioExperimentConfig, PortfolioMethod, ResampleConfig, SyntheticSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SyntheticSpec::portfolio_default();
    spec.t = 360;
    spec.d = 6;
    spec.drift.truncate(6);
    spec.vol.truncate(6);
    let r = generate_synthetic(&spec)?;
    let cfg = PortfolioExperimentConfig {
        methods: vec![
            PortfolioMethod::Ew,
            PortfolioMethod::Mvo,
            PortfolioMethod::Rpo,
            PortfolioMethod::BumvoPercentile(0.5),
        ],
        warmup: 252,
        bootstrap: ResampleConfig {
            count: 30,
            ..Default::default()
        },
        ..Default::default()
    };
    let result = run_portfolio_experiment(&r, &cfg)?;
    for run in &result.runs {
        println!(
            "{:<10} Sharpe {:>6.3}  MaxDD {:>6.2}%",
            run.method.to_string(),
            run.metrics.sharpe.unwrap_or(f64::NAN),
            run.metrics.max_dd
        );
    }

    let dir = std::env::temp_dir().join("bootrobopt-portfolio-example");
    std::fs::create_dir_all(&dir)?;
    write_portfolio_outputs(&dir, &result, &cfg)?;
    println!("tables written to {}", dir.display());
    Ok(())
}
