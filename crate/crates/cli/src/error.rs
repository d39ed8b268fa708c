use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for each error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Io = 1,
    Usage = 2,
    Parse = 3,
    Dimension = 4,
    InvalidField = 5,
    Numerical = 6,
    DomainExit = 7,
    Report = 8,
    CheckFailed = 9,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{file}: parse error at line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Model(#[from] randers::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        use randers::Error as E;
        match self {
            CliError::Io { .. } => ExitCode::Io,
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Parse { .. } => ExitCode::Parse,
            CliError::Model(e) => match e {
                E::Parse { .. } => ExitCode::Parse,
                E::Dimension { .. } => ExitCode::Dimension,
                E::NotRanders { .. } | E::MetricNotPositive { .. } | E::NotPositiveDefinite { .. } | E::MetricMismatch { .. } => {
                    ExitCode::InvalidField
                }
                E::FieldEvaluation { .. }
                | E::NoConvergence { .. }
                | E::NonCommuting { .. }
                | E::NotHermitian { .. }
                | E::EmptyShell { .. }
                | E::ZeroWeight => ExitCode::Numerical,
                E::ZeroVector { .. } | E::InvalidInput(_) => ExitCode::Usage,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
