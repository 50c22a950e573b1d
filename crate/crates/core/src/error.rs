use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("column `{0}` has no observed values and cannot be imputed")]
    UnimputableColumn(String),

    #[error("round {round}, variable `{variable}`: {source}")]
    Regressor {
        round: usize,
        variable: String,
        #[source]
        source: Box<Error>,
    },

    #[error("plan step {step} (subset {subset}): {source}")]
    Step {
        step: usize,
        subset: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missingness simulation failed: {0}")]
    Simulation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error lines and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::EmptyInput => "empty_input",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Numeric(_) => "numeric",
            Error::Shape { .. } => "shape",
            Error::UnimputableColumn(_) => "unimputable_column",
            Error::Regressor { source, .. } | Error::Step { source, .. } => source.kind(),
            Error::Capacity(_) => "capacity",
            Error::Alignment(_) => "alignment",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Simulation(_) => "simulation",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
