//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset has no observed events; partial-likelihood fitting requires at least one")]
    NoEvents,

    #[error(
        "zero follow-up time at row {row}; remove or correct zero-time observations before fitting"
    )]
    ZeroFollowUp { row: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("column {name:?} has no observed values; cannot impute a median")]
    AllMissingColumn { name: String },

    #[error("column {name:?} has zero variance; {context}")]
    DegenerateColumn { name: String, context: String },

    #[error("hessian of dimension {d}x{d} exceeds the materialization cap {cap}")]
    HessianTooLarge { d: usize, cap: usize },

    #[error("eigen decomposition failed: {0}")]
    Eigen(String),

    #[error(
        "support block is ill-conditioned (reciprocal condition {rcond:.3e} < {limit:.1e}); \
         consider a small ridge perturbation of the Hessian before inverting"
    )]
    IllConditioned { rcond: f64, limit: f64 },

    #[error("optimizer diverged: objective increased over {count} consecutive outer iterations; trace tail {tail:?}")]
    Diverged { count: usize, tail: Vec<f64> },

    #[error("newton iteration failed to converge: {0}")]
    NewtonFailed(String),

    #[error("cross-validation could not build usable folds after {attempts} attempts: {reason}")]
    FoldConstruction { attempts: usize, reason: String },

    #[error(
        "{failures} of {replications} replications failed; results with 1% or more exclusions are not reported"
    )]
    TooManyFailures { failures: usize, replications: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Classifies the error for process exit codes: input and configuration
    /// problems versus numerical failures discovered mid-computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NoEvents
                | Error::ZeroFollowUp { .. }
                | Error::AllMissingColumn { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
