use nof::NofError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] NofError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_string(), source }
    }

    /// 1 for usage and I/O problems, 2 when a size cap refuses the request, 3 for
    /// malformed input files.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(NofError::EnumerationCap { .. } | NofError::DimensionCap { .. } | NofError::BlockCapacity { .. }) => 2,
            HarnessError::Core(NofError::Parse(_)) | HarnessError::Csv(_) | HarnessError::Json(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
