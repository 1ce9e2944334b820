use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("panel is empty after cleaning")]
    EmptyPanel,

    #[error("invalid panel: {0}")]
    Panel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid bootstrap spec: {0}")]
    BootstrapSpec(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("infeasible constraint set: {0}")]
    InfeasibleConstraints(String),

    #[error("chance constraint unsatisfiable; best attained percentile {best_percentile}")]
    ChanceInfeasible { best_percentile: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
