use std::path::PathBuf;

use qwalk::error::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) | CoreError::CombinatorialLimit { .. } => 2,
                CoreError::Io(_) | CoreError::Json(_) => 1,
                _ => 3,
            },
        }
    }
}
