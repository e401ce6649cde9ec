use serde::Serialize;
use thiserror::Error;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// The input system violates a precondition (e.g. no gap).
    #[error("precondition failed in {stage}: {source}")]
    Precondition {
        stage: &'static str,
        #[source]
        source: lrgw::Error,
    },
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: lrgw::Error,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("report input {path}: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Precondition { .. } | CliError::Schema { .. } => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Tags a library error with the stage it came from; input
    /// precondition violations are kept apart from numerical failures.
    pub fn stage(stage: &'static str) -> impl FnOnce(lrgw::Error) -> CliError {
        move |source| match source {
            lrgw::Error::NonPositiveGap(_)
            | lrgw::Error::GridTooSmall { .. }
            | lrgw::Error::InvalidGrid(_)
            | lrgw::Error::DenseGuard { .. }
            | lrgw::Error::Format(_) => CliError::Precondition { stage, source },
            _ => CliError::Stage { stage, source },
        }
    }

    pub fn to_report(&self) -> ErrorReport {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Precondition {
                source: lrgw::Error::NonPositiveGap(_),
                ..
            } => "non_positive_gap",
            CliError::Precondition { .. } => "precondition",
            CliError::Stage { .. } => "stage",
            CliError::Validation(_) => "validation",
            CliError::Schema { .. } => "schema",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
        };
        let stage = match self {
            CliError::Precondition { stage, .. } | CliError::Stage { stage, .. } => Some(*stage),
            _ => None,
        };
        ErrorReport {
            kind,
            stage,
            message: self.to_string(),
        }
    }
}

/// Machine-readable form of an error, embedded in result files.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub stage: Option<&'static str>,
    pub message: String,
}
