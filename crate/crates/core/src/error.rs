use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite: pivot {pivot} at index {index}")]
    Indefinite { index: usize, pivot: f64 },

    #[error("degenerate step in {0}: zero vector where a nonzero one is required")]
    DegenerateStep(&'static str),

    #[error("degenerate problem: {0}")]
    DegenerateProblem(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("inner solve failed: {0}")]
    InnerSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;
