use hda_core::HdaError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] HdaError),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// 2 configuration, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => core_code(e),
        }
    }
}

fn core_code(e: &HdaError) -> u8 {
    match e {
        _ if e.is_numerical() => 3,
        HdaError::ZeroStd { .. } | HdaError::ZeroDenominator(_) => 3,
        HdaError::WindowFailed { source, .. } => core_code(source),
        HdaError::Io(_) | HdaError::Malformed { .. } => 4,
        _ => 2,
    }
}

pub fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
