use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Numerical(#[from] spdgauss::Error),

    /// The artifact was written but the fit did not converge.
    #[error("fit did not converge: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for usage and input problems, 3 for numerical-domain failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Input { .. } => 2,
            CliError::Numerical(_) | CliError::NotConverged(_) => 3,
        }
    }
}
