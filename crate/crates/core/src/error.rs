use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter lies outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance kernel produced a matrix that is not positive semidefinite,
    /// or a factorization failed after jitter.
    #[error("invalid kernel: {0}")]
    KernelInvalid(String),

    /// A conditioning pivot `R_{j-1}(t^j, t^j)` vanished.
    #[error("degenerate anchor {index}: residual variance {pivot:e} is below {threshold:e}")]
    DegenerateAnchor {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    /// A hypothesis required by an experiment does not hold.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("empty path: no evaluation points")]
    EmptyPath,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn grid(msg: impl Into<String>) -> Self {
        Error::GridMismatch(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
