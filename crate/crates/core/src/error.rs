use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degeneracy at node {node} (y = {coordinate:.6}): {reason}")]
    Degeneracy {
        node: usize,
        coordinate: f64,
        reason: String,
    },
    #[error("admissibility failure: {0}")]
    Admissibility(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unsupported profile variant: {0}")]
    Unsupported(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("fixed-point iteration does not contract (measured ratio {ratio:.4})")]
    NonContraction { ratio: f64 },
    #[error("step failed at t = {time:.6}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
