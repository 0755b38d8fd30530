use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock index {n} is outside the truncated basis of dimension {dim}")]
    Cutoff { n: usize, dim: usize },

    #[error("truncation loses {deficit:.3e} of the population (tolerance {tolerance:.1e}); use dim >= {suggested_dim}")]
    Truncation {
        deficit: f64,
        tolerance: f64,
        suggested_dim: usize,
    },

    #[error("superposition has zero norm")]
    Degenerate,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("no negative region in the Wigner function")]
    NoNegativity,

    #[error("no usable points: {0}")]
    EmptyRange(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics (truncation, vanishing
    /// negativity) rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. } | Error::NoNegativity | Error::Degenerate | Error::EmptyRange(_)
        )
    }
}
