use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimMismatch {
            context,
            expected,
            actual,
        }
    }
}
