use std::path::PathBuf;

use neuro_attitude::Error;

/// Failures surfaced to the shell, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("corrupt parameter file {}: {msg}", path.display())]
    CorruptParams { path: PathBuf, msg: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("refusing to overwrite {} (pass --force)", .0.display())]
    Exists(PathBuf),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::CorruptParams { .. } => 4,
            CliError::Schema(_) => 5,
            CliError::Exists(_) => 6,
            CliError::Core(e) => match e {
                Error::InvalidConfig(_)
                | Error::InsufficientData(_)
                | Error::EmptyLayer { .. }
                | Error::DimensionMismatch { .. } => 2,
                Error::EmptyDataset => 3,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
                Error::Format(_) | Error::OffGrid { .. } => 4,
                Error::Schema(_)
                | Error::Csv(_)
                | Error::NonFinite { .. }
                | Error::LengthMismatch { .. } => 5,
                _ => 1,
            },
        }
    }

    /// Reclassifies a load failure of a parameter file.
    pub fn params(path: &std::path::Path, e: Error) -> Self {
        match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingInput(path.to_path_buf())
            }
            Error::Io(_) => CliError::Core(e),
            e => CliError::CorruptParams {
                path: path.to_path_buf(),
                msg: e.to_string(),
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
