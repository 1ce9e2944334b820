use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::args::{DataArgs, IngestArgs, PortfolioArgs, RunArgs, SynthArgs, TuneArgs};
use super::config::{DataSource, ExperimentConfig, RunConfig};
use super::dates::weekday_dates_from;
use crate::error::{Error, Result};
use crate::harness::{
    generate_synthetic, run_portfolio_experiment, run_tuning_experiment, write_portfolio_outputs,
    write_tuning_outputs, PortfolioExperimentConfig, RegimeShift, SyntheticSpec,
    TuningExperimentConfig,
};
use crate::optimize::ConstraintSet;
use crate::panel::{load_csv, CsvSchema, PricePanel, ReturnPanel};

/// A command failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files: exit code 2.
    Usage(Error),
    /// The run itself failed: exit code 1.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => e,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error().fmt(f)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

trait Phase<T> {
    fn usage(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T> Phase<T> for Result<T> {
    fn usage(self) -> CliResult<T> {
        self.map_err(CliError::Usage)
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(CliError::Runtime)
    }
}

/// What `ingest` reports.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub rows: usize,
    pub assets: usize,
    pub first_date: String,
    pub last_date: String,
    pub dropped_rows: usize,
    pub output: PathBuf,
}

impl std::fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "T: {}", self.rows)?;
        writeln!(f, "d: {}", self.assets)?;
        writeln!(f, "dates: {} .. {}", self.first_date, self.last_date)?;
        writeln!(f, "dropped rows: {}", self.dropped_rows)?;
        write!(f, "panel: {}", self.output.display())
    }
}

fn write_file(path: &Path, write: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(file)
}

/// Cleans a price CSV and writes it back in wide layout.
pub fn cmd_ingest(args: &IngestArgs, output_root: &Path) -> CliResult<IngestSummary> {
    let schema = CsvSchema {
        date_column: args.date_column.clone(),
        layout: args.layout,
    };
    let ingested = load_csv(&args.path, &schema).usage()?;
    let panel = ingested.panel;
    let output = match &args.out {
        Some(p) => p.clone(),
        None => {
            let stem = args.path.file_stem().unwrap_or("panel".as_ref());
            output_root.join("ingest").join(stem).with_extension("csv")
        }
    };
    write_file(&output, |f| panel.write_csv(f)).runtime()?;
    Ok(IngestSummary {
        rows: panel.len(),
        assets: panel.n_assets(),
        first_date: panel.dates()[0].clone(),
        last_date: panel.dates()[panel.len() - 1].clone(),
        dropped_rows: ingested.dropped_rows,
        output,
    })
}

/// Compounds simple returns into prices starting at 100 on `dates[0]`;
/// returns are dated `dates[1..]`.
pub fn returns_to_prices(r: &ReturnPanel, dates: Vec<String>) -> Result<PricePanel> {
    let (t, d) = (r.len(), r.n_assets());
    if dates.len() != t + 1 {
        return Err(Error::Dimension {
            expected: t + 1,
            got: dates.len(),
        });
    }
    let mut prices = DMatrix::from_element(t + 1, d, 100.0);
    for i in 0..t {
        for k in 0..d {
            let x = r.values()[(i, k)];
            if x <= -1.0 {
                return Err(Error::Domain(format!(
                    "return {x} at row {i} of {} wipes out the price",
                    r.assets()[k]
                )));
            }
            prices[(i + 1, k)] = prices[(i, k)] * (1.0 + x);
        }
    }
    PricePanel::new(dates, r.assets().to_vec(), prices)
}

fn synth_spec(args: &SynthArgs) -> Result<SyntheticSpec> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => args.preset.spec(),
    };
    if let Some(t) = args.t {
        spec.t = t;
    }
    if let Some(d) = args.d {
        spec.d = d;
    }
    if !args.drift.is_empty() {
        spec.drift = args.drift.clone();
    }
    if !args.vol.is_empty() {
        spec.vol = args.vol.clone();
    }
    if let Some(ar) = args.ar {
        spec.ar = ar;
    }
    if let Some(c) = args.correlation {
        spec.correlation = c;
        spec.correlation_matrix = None;
    }
    if let Some(at) = args.shift_at {
        spec.shift = Some(RegimeShift {
            at,
            drift_multiplier: args.shift_multiplier,
        });
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    // Per-asset vectors from a preset no longer fit once `d` changes.
    if args.d.is_some() && args.drift.is_empty() && spec.drift.len() != 1 && spec.drift.len() != spec.d {
        spec.drift = vec![spec.drift.iter().sum::<f64>() / spec.drift.len() as f64];
    }
    if args.d.is_some() && args.vol.is_empty() && spec.vol.len() != 1 && spec.vol.len() != spec.d {
        spec.vol = vec![spec.vol.iter().sum::<f64>() / spec.vol.len() as f64];
    }
    spec.validate()?;
    Ok(spec)
}

/// Writes a synthetic price panel as a wide CSV.
pub fn cmd_synth(args: &SynthArgs) -> CliResult<PathBuf> {
    let spec = synth_spec(args).usage()?;
    let r = generate_synthetic(&spec).runtime()?;
    let prices = returns_to_prices(&r, weekday_dates_from(args.start, r.len() + 1)).runtime()?;
    write_file(&args.out, |f| prices.write_csv(f)).runtime()?;
    Ok(args.out.clone())
}

fn base_config(run: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    // A hashed id is recomputed so that overrides land in a new directory.
    if cfg.run_id.is_some() && cfg.run_id == Some(cfg.hash()?) {
        cfg.run_id = None;
    }
    if run.seed.is_some() {
        cfg.seed = run.seed;
    }
    if run.run_id.is_some() {
        cfg.run_id = run.run_id.clone();
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs, default: DataSource) {
    let source = cfg.data.get_or_insert(default);
    if let Some(path) = &data.data {
        *source = DataSource::Csv {
            path: path.clone(),
            schema: CsvSchema::default(),
            returns: Default::default(),
        };
    }
    if let DataSource::Csv {
        schema, returns, ..
    } = source
    {
        if let Some(l) = data.layout {
            schema.layout = l;
        }
        if let Some(c) = &data.date_column {
            schema.date_column = c.clone();
        }
        if let Some(k) = data.return_kind {
            *returns = k;
        }
    }
}

fn prepare(
    mut cfg: RunConfig,
    default_experiment: ExperimentConfig,
    default_data: DataSource,
) -> Result<(RunConfig, ReturnPanel)> {
    cfg = cfg.resolve(default_experiment, default_data)?;
    let r = cfg.data()?.load()?;
    Ok((cfg, r))
}

fn start_run(cfg: &RunConfig, output_root: &Path) -> Result<PathBuf> {
    let dir = cfg.output_dir(output_root)?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

fn portfolio_config(args: &PortfolioArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.run)?;
    apply_data(
        &mut cfg,
        &args.data,
        DataSource::Synthetic {
            spec: SyntheticSpec::portfolio_default(),
        },
    );
    let exp = cfg
        .experiment
        .get_or_insert_with(|| ExperimentConfig::Portfolio(Default::default()));
    let ExperimentConfig::Portfolio(p) = exp else {
        return Err(Error::Config(format!(
            "config describes a `{}` experiment, not `portfolio`",
            exp.name()
        )));
    };
    if !args.methods.is_empty() {
        p.methods = args.methods.clone();
    }
    if let Some(regime) = args.constraint {
        p.constraints = ConstraintSet {
            regime,
            ..p.constraints
        };
    }
    if let Some(b) = args.bound {
        p.constraints.bound = b;
    }
    if let Some(w) = args.warmup {
        p.warmup = w;
    }
    if let Some(n) = args.boot.replicates {
        p.bootstrap.count = n;
    }
    if let Some(m) = args.boot.bootstrap_method {
        p.bootstrap.method = m;
    }
    if args.boot.block_length.is_some() {
        p.bootstrap.block_length = args.boot.block_length;
    }
    if let Some(l) = args.lambda {
        p.lambda = l;
    }
    if let Some(a) = args.rpo_alpha {
        p.rpo_alpha = a;
    }
    if args.kappa2.is_some() {
        p.kappa2 = args.kappa2;
    }
    if let Some(tc) = args.tc {
        p.tc = tc;
    }
    if let Some(v) = args.vol_target {
        p.vol_target = v;
    }
    Ok(cfg)
}

/// Runs the expanding-window portfolio backtest and writes its results
/// directory, which is returned.
pub fn cmd_portfolio(args: &PortfolioArgs, output_root: &Path) -> CliResult<PathBuf> {
    let cfg = portfolio_config(args).usage()?;
    let (cfg, r) = prepare(
        cfg,
        ExperimentConfig::Portfolio(PortfolioExperimentConfig::default()),
        DataSource::Synthetic {
            spec: SyntheticSpec::portfolio_default(),
        },
    )
    .usage()?;
    let Ok(ExperimentConfig::Portfolio(exp)) = cfg.experiment() else {
        unreachable!("resolved against a portfolio default")
    };
    exp.validate(r.len(), r.n_assets()).usage()?;
    let dir = start_run(&cfg, output_root).runtime()?;
    let result = run_portfolio_experiment(&r, exp).runtime()?;
    write_portfolio_outputs(&dir, &result, exp).runtime()?;
    Ok(dir)
}

fn tune_config(args: &TuneArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.run)?;
    apply_data(
        &mut cfg,
        &args.data,
        DataSource::Synthetic {
            spec: SyntheticSpec::tuning_default(),
        },
    );
    let exp = cfg
        .experiment
        .get_or_insert_with(|| ExperimentConfig::Tune(Default::default()));
    let ExperimentConfig::Tune(c) = exp else {
        return Err(Error::Config(format!(
            "config describes a `{}` experiment, not `tune`",
            exp.name()
        )));
    };
    if !args.rules.is_empty() {
        c.rules = args.rules.clone();
    }
    if !args.lookbacks.is_empty() {
        c.lookbacks = args.lookbacks.clone();
    }
    if let Some(u) = args.utility {
        c.utility = u;
    }
    if let Some(f) = args.train_fraction {
        c.split.train_fraction = f;
    }
    if let Some(n) = args.boot.replicates {
        c.bootstrap.count = n;
    }
    if let Some(m) = args.boot.bootstrap_method {
        c.bootstrap.method = m;
    }
    if args.boot.block_length.is_some() {
        c.bootstrap.block_length = args.boot.block_length;
    }
    if let Some(tc) = args.tc {
        c.tc = tc;
    }
    if let Some(l) = args.ci_level {
        c.ci_level = l;
    }
    if args.literal_selection {
        c.literal_selection = true;
    }
    Ok(cfg)
}

/// Runs per-asset momentum tuning and writes its results directory, which
/// is returned.
pub fn cmd_tune(args: &TuneArgs, output_root: &Path) -> CliResult<PathBuf> {
    let cfg = tune_config(args).usage()?;
    let (cfg, r) = prepare(
        cfg,
        ExperimentConfig::Tune(TuningExperimentConfig::default()),
        DataSource::Synthetic {
            spec: SyntheticSpec::tuning_default(),
        },
    )
    .usage()?;
    let Ok(ExperimentConfig::Tune(exp)) = cfg.experiment() else {
        unreachable!("resolved against a tune default")
    };
    exp.validate().usage()?;
    let dir = start_run(&cfg, output_root).runtime()?;
    let result = run_tuning_experiment(&r, exp).runtime()?;
    write_tuning_outputs(&dir, &result, exp).runtime()?;
    Ok(dir)
}
