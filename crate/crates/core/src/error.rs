use thiserror::Error;

/// Errors raised by the optimizer, the channel simulator and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, out-of-range parameters or malformed configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A factorization or inversion failed on a matrix that should have been definite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The dual system matrix is singular at `lambda = 0`; a strictly positive multiplier is needed.
    #[error("dual system matrix is singular at lambda = 0")]
    SingularDual,

    #[error("result file does not match the expected schema: column `{column}`")]
    Schema { column: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
