use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("memory budget exceeded: {needed} entries requested, budget is {budget}")]
    MemoryBudget { needed: usize, budget: usize },

    #[error(
        "enumeration budget exceeded: {supports} supports, budget is {budget}; \
         use the randomized estimator instead"
    )]
    EnumerationBudget { supports: u128, budget: u128 },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed operator container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
