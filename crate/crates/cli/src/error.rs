use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] cts::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &cts::Error) -> i32 {
    use cts::Error::*;
    match e {
        Parse(_) => 2,
        InvalidModel(_)
        | DegenerateGeometry { .. }
        | InvalidArgument(_)
        | IndexOutOfRange { .. }
        | Dimension { .. }
        | AnchorCount { .. } => 3,
        Diverged { .. } => 5,
        Substep { source, .. } => core_exit_code(source),
        _ => 4,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
