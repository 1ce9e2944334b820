//! Bootstrap the mean and covariance, then build a quantile box around the
//! replicates and count how many fall inside it.

use bootrobopt::estimate::{ensemble_moments, in_region, quantile_box, sample_moments};
use bootrobopt::harness::{generate_synthetic, SyntheticSpec};
use bootrobopt::resample::{BootstrapMethod, BootstrapSpec};

fn main() -> bootrobopt::Result<()> {
    let r = generate_synthetic(&SyntheticSpec {
        t: 750,
        d: 3,
        correlation: 0.3,
        ..Default::default()
    })?;
    let plug_in = sample_moments(&r)?;
    println!("sample mean {:.5?}", plug_in.mu.as_slice());

    let ensemble = ensemble_moments(&r, &BootstrapSpec::new(BootstrapMethod::Stationary, 10, 300, 1))?;
    for gamma in [0.5, 0.9, 0.99] {
        let region = quantile_box(&ensemble, gamma)?;
        let mut inside = 0;
        for m in &ensemble.estimates {
            if in_region(m, &region)? {
                inside += 1;
            }
        }
        println!(
            "gamma {gamma}: mean box for asset 0 [{:.5}, {:.5}], {inside}/{} replicates inside",
            region.mu_lo[0],
            region.mu_hi[0],
            ensemble.estimates.len()
        );
    }
    Ok(())
}
