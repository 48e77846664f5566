use std::path::PathBuf;

use thiserror::Error;

/// Failure of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Process exit status: 1 configuration, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io { .. } | CliError::Csv { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }
}

impl From<seisfrag::error::Error> for CliError {
    fn from(err: seisfrag::error::Error) -> Self {
        use seisfrag::error::Error as E;
        let msg = err.to_string();
        match err {
            E::Config(_) | E::Parameter(_) | E::Model(_) | E::Bandwidth(_) => CliError::Config(msg),
            E::InfeasibleDescriptor(_)
            | E::DegenerateData(_)
            | E::Fit(_)
            | E::UndefinedDescriptor(_)
            | E::Diagnostic(_)
            | E::Stats(_)
            | E::Format(_)
            | E::Io(_) => CliError::Data(msg),
            E::Integration { .. } | E::Ensemble(_) | E::Numerical(_) => CliError::Numerical(msg),
        }
    }
}
