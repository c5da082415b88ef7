use thiserror::Error;

use crate::flow::Trajectory;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The inner proximal-gradient solver hit its iteration cap. `best` holds the last iterate.
    #[error("inner solver stopped after {iterations} iterations with residual {residual:e}")]
    ToleranceNotMet {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem `{0}` has no known saddle point")]
    MissingSolution(String),

    /// Integration stopped early; `partial` holds every sample recorded before the abort.
    #[error("integration aborted at t = {t}: {reason}")]
    IntegrationAborted {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("empty trace")]
    EmptyTrace,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
