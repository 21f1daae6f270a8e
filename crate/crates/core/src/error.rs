use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs violate a documented precondition (grid too coarse, bad range, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A point or parameter lies outside the region where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not reach its tolerance.
    #[error("solver error: {message} (residual {residual:.3e})")]
    Solver {
        message: String,
        residual: f64,
        history: Vec<f64>,
    },

    /// A linear system is too close to singular to be trusted.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Least-squares fitting could not be carried out.
    #[error("fitting error: {0}")]
    Fit(String),

    /// Diagnostics (binning, localization fits) had too little data.
    #[error("diagnostics error: {0}")]
    Diagnostics(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn solver(msg: impl Into<String>, residual: f64) -> Self {
        Error::Solver {
            message: msg.into(),
            residual,
            history: Vec::new(),
        }
    }

    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
