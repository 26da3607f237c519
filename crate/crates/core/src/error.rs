//! Error taxonomy shared by all solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (singular system, eigensolver breakdown,
    /// ill-conditioned regression).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// An iterative scheme did not contract within its iteration budget.
    /// Carries the history of successive-iterate distance ratios.
    #[error("convergence failure: {message} (ratio history {ratios:?})")]
    ConvergenceFailure { message: String, ratios: Vec<f64> },

    /// An empirically checked property of the problem data does not hold.
    #[error("property failure: {0}")]
    PropertyFailure(String),

    /// Configuration parse or validation error.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    /// CLI exit code for this error class: 1 property failure,
    /// 2 usage/config, 3 numerical/convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PropertyFailure(_) => 1,
            Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::NumericalFailure(_) | Error::ConvergenceFailure { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
