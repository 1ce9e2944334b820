use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use super::dates::START_DATE;
use crate::evaluate::SelectionRule;
use crate::harness::{PortfolioMethod, SyntheticSpec};
use crate::optimize::Regime;
use crate::panel::{Layout, ReturnKind};
use crate::resample::BootstrapMethod;
use crate::strategy::UtilityKind;

/// Parses a snake_case enum name the way config files spell it.
fn snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bootrobopt", version, about = "Bootstrap-robust portfolio and strategy tuning experiments")]
pub struct Cli {
    /// Root directory for results.
    #[arg(long, short, global = true, default_value = "results")]
    pub output: PathBuf,

    /// Worker threads; results do not depend on it.
    #[arg(long, short, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a price CSV, print a summary and write it back in wide layout.
    Ingest(IngestArgs),
    /// Generate a synthetic price panel.
    Synth(SynthArgs),
    /// Expanding-window portfolio backtest across optimizers.
    Portfolio(PortfolioArgs),
    /// Per-asset momentum lookback selection under several rules.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub path: PathBuf,
    #[arg(long, value_parser = snake::<Layout>, default_value = "wide")]
    pub layout: Layout,
    #[arg(long, default_value = "date")]
    pub date_column: String,
    /// Output file; defaults to `<output>/ingest/<stem>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Preset {
    #[default]
    Basic,
    Portfolio,
    Tuning,
}

impl Preset {
    pub fn spec(self) -> SyntheticSpec {
        match self {
            Preset::Basic => SyntheticSpec::default(),
            Preset::Portfolio => SyntheticSpec::portfolio_default(),
            Preset::Tuning => SyntheticSpec::tuning_default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Base parameters, overridden by the flags below.
    #[arg(long, value_enum, default_value_t, conflicts_with = "spec")]
    pub preset: Preset,
    /// JSON file holding a full generator spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of returns; the file has one more price row.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Per-period drift, one value or one per asset.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub drift: Vec<f64>,
    /// Per-period volatility, one value or one per asset.
    #[arg(long, value_delimiter = ',')]
    pub vol: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ar: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub correlation: Option<f64>,
    /// Fraction of the sample after which the drift is multiplied.
    #[arg(long)]
    pub shift_at: Option<f64>,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub shift_multiplier: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Date of the first price row.
    #[arg(long, default_value_t = START_DATE)]
    pub start: NaiveDate,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed [fallback: $BOOTROBOPT_SEED, then 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results subdirectory; defaults to a hash of the resolved config.
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Price CSV; without it a synthetic panel is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = snake::<Layout>)]
    pub layout: Option<Layout>,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long, value_parser = snake::<ReturnKind>)]
    pub return_kind: Option<ReturnKind>,
}

#[derive(Debug, Args)]
pub struct BootArgs {
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_parser = snake::<BootstrapMethod>)]
    pub bootstrap_method: Option<BootstrapMethod>,
    /// Block length; defaults to the cube root of the series length.
    #[arg(long)]
    pub block_length: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Comma-separated: ew, mvo, rpo, bumvo_<pct>, bumvo_wc_<pct>.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<PortfolioMethod>,
    #[arg(long, value_parser = snake::<Regime>)]
    pub constraint: Option<Regime>,
    /// Per-asset weight bound for long_short.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Risk aversion.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rpo_alpha: Option<f64>,
    /// Squared uncertainty radius for rpo, overriding `--rpo-alpha`.
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub tc: Option<f64>,
    #[arg(long)]
    pub vol_target: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Comma-separated: npb_<pct>, erm, cb1, cb2.
    #[arg(long, value_delimiter = ',')]
    pub rules: Vec<SelectionRule>,
    #[arg(long, value_parser = snake::<UtilityKind>)]
    pub utility: Option<UtilityKind>,
    #[arg(long, value_delimiter = ',')]
    pub lookbacks: Vec<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub tc: Option<f64>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    /// Rank percentile rules by parameter-level mean utility.
    #[arg(long)]
    pub literal_selection: bool,
}
