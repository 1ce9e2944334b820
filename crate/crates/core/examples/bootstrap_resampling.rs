//! Draw block-bootstrap index paths and compare how each scheme preserves
//! serial correlation.

use bootrobopt::harness::{generate_synthetic, SyntheticSpec};
use bootrobopt::resample::{
    default_block_length, generate_all, materialize_series, BootstrapMethod, BootstrapSpec,
};

fn lag1(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    num / den
}

fn main() -> bootrobopt::Result<()> {
    let r = generate_synthetic(&SyntheticSpec {
        t: 2000,
        d: 1,
        ar: 0.5,
        ..Default::default()
    })?;
    let series: Vec<f64> = r.values().column(0).iter().copied().collect();
    println!("original lag-1 autocorrelation {:.3}", lag1(&series));

    let l = default_block_length(series.len());
    for method in [
        BootstrapMethod::MovingBlock,
        BootstrapMethod::CircularBlock,
        BootstrapMethod::Stationary,
    ] {
        for block in [1, l, 4 * l] {
            let spec = BootstrapSpec::new(method, block, 200, 7);
            let paths = generate_all(&spec, series.len())?;
            let avg = paths
                .iter()
                .map(|p| lag1(&materialize_series(&series, p)))
                .sum::<f64>()
                / paths.len() as f64;
            println!("{method:?} L={block:<3} mean lag-1 {avg:.3}");
        }
    }
    Ok(())
}
