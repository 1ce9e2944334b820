use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{
    generate_synthetic, PortfolioExperimentConfig, SyntheticSpec, TuningExperimentConfig,
};
use crate::panel::{load_csv, to_returns, CsvSchema, ReturnKind, ReturnPanel};

use super::dates::weekday_dates;

/// Environment variable consulted when neither a flag nor the config file
/// sets the seed.
pub const SEED_ENV: &str = "BOOTROBOPT_SEED";
pub const DEFAULT_SEED: u64 = 42;

/// Where the return panel comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A price CSV, converted to returns on load.
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
        #[serde(default)]
        returns: ReturnKind,
    },
    /// A generated panel. Its seed is replaced by the run seed.
    Synthetic { spec: SyntheticSpec },
}

impl DataSource {
    pub fn load(&self) -> Result<ReturnPanel> {
        match self {
            DataSource::Csv {
                path,
                schema,
                returns,
            } => to_returns(&load_csv(path, schema)?.panel, *returns),
            DataSource::Synthetic { spec } => {
                let r = generate_synthetic(spec)?;
                // Returns are dated from the second weekday; the first one
                // carries the base price when the panel is written as prices.
                let dates = weekday_dates(r.len() + 1).split_off(1);
                ReturnPanel::new(dates, r.assets().to_vec(), r.values().clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Portfolio(PortfolioExperimentConfig),
    Tune(TuningExperimentConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Portfolio(_) => "portfolio",
            ExperimentConfig::Tune(_) => "tune",
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Portfolio(c) => c.bootstrap.seed = seed,
            ExperimentConfig::Tune(c) => c.bootstrap.seed = seed,
        }
    }
}

/// Contents of a `--config` file and of the `config.json` every run writes.
///
/// Any field may be omitted from a file. After resolution every field is
/// set, and the resolved value is what `config.json` records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub run_id: Option<String>,
    pub data: Option<DataSource>,
    pub experiment: Option<ExperimentConfig>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fills every unset field. `seed` falls back to [`SEED_ENV`] and then
    /// [`DEFAULT_SEED`]; the bootstrap seed and a synthetic panel's seed
    /// are overwritten by it. The run id defaults to a hash of the rest of
    /// the resolved config.
    pub fn resolve(mut self, default_experiment: ExperimentConfig, default_data: DataSource) -> Result<Self> {
        let seed = match self.seed {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        };
        self.seed = Some(seed);

        let mut experiment = self.experiment.take().unwrap_or(default_experiment.clone());
        if experiment.name() != default_experiment.name() {
            return Err(Error::Config(format!(
                "config describes a `{}` experiment, not `{}`",
                experiment.name(),
                default_experiment.name()
            )));
        }
        experiment.set_seed(seed);
        self.experiment = Some(experiment);

        let mut data = self.data.take().unwrap_or(default_data);
        if let DataSource::Synthetic { spec } = &mut data {
            spec.seed = seed;
        }
        self.data = Some(data);

        if self.run_id.is_none() {
            self.run_id = Some(self.hash()?);
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(Error::Config(format!("run id `{id}` is not a directory name")));
            }
        }
        Ok(self)
    }

    /// First 12 hex digits of the SHA-256 of the config without its run id.
    pub(crate) fn hash(&self) -> Result<String> {
        let mut bare = self.clone();
        bare.run_id = None;
        let digest = Sha256::digest(serde_json::to_vec(&bare)?);
        Ok(digest.iter().take(6).map(|b| format!("{b:02x}")).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn experiment(&self) -> Result<&ExperimentConfig> {
        self.experiment
            .as_ref()
            .ok_or_else(|| Error::Config("experiment is unresolved".into()))
    }

    pub fn data(&self) -> Result<&DataSource> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("data source is unresolved".into()))
    }

    /// `<root>/<experiment>/<run-id>`.
    pub fn output_dir(&self, root: &Path) -> Result<PathBuf> {
        let id = self
            .run_id
            .as_deref()
            .ok_or_else(|| Error::Config("run id is unresolved".into()))?;
        Ok(root.join(self.experiment()?.name()).join(id))
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{SEED_ENV}: {e}"))),
    }
}
