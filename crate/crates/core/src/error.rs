use thiserror::Error;

/// Errors produced by the decomposition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain (bits, ranges, ranks, ...).
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// An input matrix or scalar contained NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Matrix dimensions do not line up for the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A binary file did not conform to the expected layout.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// LDL/Cholesky hit a non-positive pivot; the input is not positive definite.
    #[error("factorization failed: non-positive pivot at index {pivot} (value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// A closed-form prescription was queried outside its admissible regime.
    #[error("outside admissible regime: {0}")]
    Regime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
