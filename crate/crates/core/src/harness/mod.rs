//! End-to-end experiments: the expanding-window portfolio backtest, per-asset
//! momentum tuning, and a synthetic panel generator.

mod portfolio;
mod report;
mod synthetic;
mod tuning;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::resample::{default_block_length, mix_seed, BootstrapMethod, BootstrapSpec};

pub use portfolio::{
    run_portfolio_experiment, MethodRun, PortfolioExperimentConfig, PortfolioMethod, PortfolioResult,
    StepFailure,
};
pub use report::{write_portfolio_outputs, write_tuning_outputs, PORTFOLIO_METRICS_HEADER};
pub use synthetic::{generate_synthetic, RegimeShift, SyntheticSpec};
pub use tuning::{
    run_tuning_experiment, AssetTuning, CiRow, RuleOutcome, TuningExperimentConfig, TuningResult,
};

/// Bootstrap settings for experiments whose series length varies.
///
/// `block_length: None` uses `⌈T^{1/3}⌉` of whatever series is resampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub method: BootstrapMethod,
    pub block_length: Option<usize>,
    pub count: usize,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            method: BootstrapMethod::Stationary,
            block_length: None,
            count: 100,
            seed: 42,
        }
    }
}

impl ResampleConfig {
    /// Spec for a series of length `t`, seeded from `(seed, tag)`.
    pub fn spec_for(&self, t: usize, tag: u64) -> Result<BootstrapSpec> {
        let spec = BootstrapSpec::new(
            self.method,
            self.block_length.unwrap_or_else(|| default_block_length(t)),
            self.count,
            mix_seed(self.seed, tag),
        );
        spec.validate(t)?;
        Ok(spec)
    }
}
