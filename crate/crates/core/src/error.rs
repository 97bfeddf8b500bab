use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {deviation:e} exceeds {tolerance:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} is below floor {floor:e}")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("item {index} failed: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<DpsError>,
    },

    #[error("cache format error: {0}")]
    Cache(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl DpsError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        DpsError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at(index: usize, source: DpsError) -> Self {
        DpsError::AtIndex {
            index,
            source: Box::new(source),
        }
    }
}

impl From<std::io::Error> for DpsError {
    fn from(e: std::io::Error) -> Self {
        DpsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DpsError>;
