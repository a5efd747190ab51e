use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] farmscale_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("usage: {0}")]
    Usage(String),
}

impl HarnessError {
    /// Stable identifier printed on the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        use farmscale_core::Error as E;
        match self {
            HarnessError::Core(E::FitFailure(_)) => "fit_failure",
            HarnessError::Core(E::ModelDomain { .. }) => "model_domain",
            HarnessError::Core(E::Numeric(_)) => "numeric",
            HarnessError::Core(E::EmptyInput(_)) => "empty_input",
            HarnessError::Core(_) => "invalid_argument",
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::Config(_) => "config",
            HarnessError::Checkpoint(_) => "checkpoint",
            HarnessError::Csv(_) => "csv",
            HarnessError::Json(_) => "json",
            HarnessError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Parse { .. } | HarnessError::Csv(_) | HarnessError::Json(_) => 4,
            HarnessError::Checkpoint(_) => 5,
            HarnessError::Core(_) => 6,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
