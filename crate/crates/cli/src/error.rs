use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("data: {0}")]
    InvalidData(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path} not found; run `sfbreak {producer}` first (or `sfbreak run`)")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },

    #[error("fit: {0}")]
    Fit(String),

    #[error("numerics: {0}")]
    Numerics(String),

    /// Help or version text was printed; not a failure.
    #[error("help requested")]
    Help,

    #[error("delta checks failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// Process exit status: 2 data or configuration, 3 fitting, 4 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data { .. }
            | CliError::InvalidData(_)
            | CliError::Config(_) | CliError::MissingArtifact { .. } | CliError::Io { .. } => 2,
            CliError::Help => 0,
            CliError::Fit(_) => 3,
            CliError::Numerics(_) | CliError::CheckFailed(_) => 4,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

impl From<sfbreak::Error> for CliError {
    fn from(e: sfbreak::Error) -> Self {
        use sfbreak::Error as E;
        match e {
            E::InvalidData(_) | E::DimensionMismatch { .. } => CliError::InvalidData(e.to_string()),
            E::Optimization(_) | E::SingularInformation { .. } => CliError::Fit(e.to_string()),
            _ => CliError::Numerics(e.to_string()),
        }
    }
}
