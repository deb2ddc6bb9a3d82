use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// `Validation` covers malformed input. The remaining variants describe
/// numerical breakdowns and map to a different process exit code in the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("chart singularity: {0}")]
    ChartSingularity(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    #[must_use]
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
