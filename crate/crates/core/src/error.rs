//! Crate-wide error type.

use crate::maxmargin::MarginSolution;

/// Errors produced by samplers, solvers, and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on user-supplied parameters failed.
    #[error("validation error: {0}")]
    Validation(String),

    /// The hard-margin problem has no feasible point; carries the best iterate.
    #[error("infeasible margin problem: {reason}")]
    Infeasible {
        reason: String,
        best: Box<MarginSolution>,
    },

    /// Gradient descent exhausted its step budget before reaching the loss threshold.
    #[error("training failure: {reason}")]
    TrainingFailure {
        reason: String,
        trace: crate::leaky::TrainTrace,
    },

    /// Numerical subroutine could not produce a solution (singular system, NNLS stall).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code used by the CLI: 2 for validation, 3 for
    /// infeasibility/training failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Infeasible { .. } | Error::TrainingFailure { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
