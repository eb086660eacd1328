use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point coordinate fell outside its bound pair.
    #[error("coordinate {index} = {value} outside bounds [{lower}, {upper}]")]
    Domain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Cholesky factorization failed on every rung of the jitter ladder.
    #[error("factorization failed after jitter ladder {ladder:?}")]
    Factorization { ladder: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
