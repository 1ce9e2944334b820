//! Solve one allocation problem with the plug-in, ellipsoidal and
//! bootstrap-robust optimizers and compare their weights.

use bootrobopt::estimate::{ensemble_moments, estimation_covariance, sample_moments};
use bootrobopt::harness::{generate_synthetic, SyntheticSpec};
use bootrobopt::optimize::{
    bumvo_percentile, bumvo_worstcase, mvo_plugin, percentile, rpo, utilities, ConstraintSet,
    GradientAscentConfig, RobustnessParams, Weights,
};
use bootrobopt::resample::{BootstrapMethod, BootstrapSpec};

fn main() -> bootrobopt::Result<()> {
    let r = generate_synthetic(&SyntheticSpec {
        t: 500,
        d: 4,
        drift: vec![2e-4, 3e-4, 4e-4, 5e-4],
        vol: vec![0.008, 0.01, 0.012, 0.016],
        ..Default::default()
    })?;
    let lambda = 2.0;
    let c = ConstraintSet::long_only();
    let plug_in = sample_moments(&r)?;
    let omega = estimation_covariance(&r)?;
    let ensemble = ensemble_moments(&r, &BootstrapSpec::new(BootstrapMethod::Stationary, 8, 100, 3))?;
    let params = RobustnessParams {
        lambda,
        alpha: 0.2,
        ..Default::default()
    };

    let candidates: Vec<(&str, Weights)> = vec![
        ("mvo", mvo_plugin(&plug_in, lambda, &c)?.weights),
        ("rpo", rpo(&plug_in, &omega, 4.0, lambda, &c)?.weights),
        (
            "bumvo_20",
            bumvo_percentile(&ensemble, &params, &c, &GradientAscentConfig::default())?.weights,
        ),
        ("bumvo_wc_90", bumvo_worstcase(&ensemble, 0.9, lambda, &c)?.weights),
    ];
    for (name, w) in &candidates {
        let u = utilities(w, &ensemble, lambda);
        println!(
            "{name:<12} w = {:.3?}  20th pct utility {:.6}",
            w.as_slice(),
            percentile(&u, 0.2)?
        );
    }
    Ok(())
}
