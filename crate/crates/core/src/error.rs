use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure categories shared by every stage of the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration, such as an unattainable distribution moment pair.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside its admissible domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Energy descriptors that no Gamma-shaped modulating function can match.
    #[error("infeasible ground-motion descriptors: {0}")]
    InfeasibleDescriptor(String),

    #[error("invalid structural model: {0}")]
    Model(String),

    #[error("time integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    /// Data that cannot support the requested estimator.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid bandwidth: {0}")]
    Bandwidth(String),

    #[error("descriptor undefined: {0}")]
    UndefinedDescriptor(String),

    #[error("diagnostic unavailable: {0}")]
    Diagnostic(String),

    #[error("insufficient statistics: {0}")]
    Stats(String),

    #[error("bootstrap ensemble failed: {0}")]
    Ensemble(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(String),

    /// Iterative method that did not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
