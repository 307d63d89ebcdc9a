use thiserror::Error;

use crate::sdp::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The SDP solver stopped without reaching the optimality tolerances.
    #[error("solver stopped with status {status:?}")]
    Solver { status: SolveStatus },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A closed-form certificate did not satisfy its defining identity.
    #[error("certificate identity mismatch: residual {residual:.3e} at exponent {exponent:?}")]
    ConstructionMismatch { residual: f64, exponent: Vec<u32> },

    #[error("vertex enumeration needs m <= {limit}, got m = {m}; use a certificate method")]
    TooManyVertices { m: usize, limit: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
