//! The `bootrobopt` command line: `ingest`, `synth`, `portfolio`, `tune`.
//!
//! Exit codes are 0 on success, 1 when a run fails and 2 for usage,
//! config or input errors.

mod args;
mod commands;
mod config;
mod dates;

use std::ffi::OsString;

use clap::Parser;

pub use args::{
    BootArgs, Cli, Command, DataArgs, IngestArgs, PortfolioArgs, Preset, RunArgs, SynthArgs,
    TuneArgs,
};
pub use commands::{
    cmd_ingest, cmd_portfolio, cmd_synth, cmd_tune, returns_to_prices, CliError, CliResult,
    IngestSummary,
};
pub use config::{DataSource, ExperimentConfig, RunConfig, DEFAULT_SEED, SEED_ENV};
pub use dates::{weekday_dates, weekday_dates_from, START_DATE};

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ingest(a) => println!("{}", cmd_ingest(a, &cli.output)?),
        Command::Synth(a) => println!("{}", cmd_synth(a)?.display()),
        Command::Portfolio(a) => println!("{}", cmd_portfolio(a, &cli.output)?.display()),
        Command::Tune(a) => println!("{}", cmd_tune(a, &cli.output)?.display()),
    }
    Ok(())
}

/// Runs an already parsed command line, inside a pool of `--jobs` threads
/// when given.
pub fn execute(cli: &Cli) -> CliResult<()> {
    match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| CliError::Runtime(crate::Error::Config(e.to_string())))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
