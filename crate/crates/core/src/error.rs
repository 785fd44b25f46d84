use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    /// A caller supplied an argument outside the documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A routine was called on an input that breaks its contract (e.g. the wrong syndrome branch).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A numerical procedure failed (ill-conditioning, non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A least-squares fit could not be performed on the supplied data.
    #[error("fit failure: {0}")]
    Fit(String),
    /// Malformed configuration text.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    /// Reading input or writing output failed.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
