use thiserror::Error;

/// Errors produced by cone construction, pseudo-cone evaluation, and the solver.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("generator matrix is rank-deficient: condition number {cond:.3e} exceeds {limit:.1e}")]
    SingularGenerators { cond: f64, limit: f64 },

    #[error("{context}: direction outside the required spherical patch")]
    DomainViolation { context: String },

    #[error("offset {index} must be strictly positive and finite, got {value}")]
    NonPositiveOffset { index: usize, value: f64 },

    #[error("radius {index} must be strictly positive and finite, got {value}")]
    NonPositiveRadius { index: usize, value: f64 },

    #[error("{context}: |<u,v>| = {value:.3e} is below the 1e-12 transversality floor")]
    NonTransversalPair { context: String, value: f64 },

    #[error("linear program failed: {reason}")]
    LpFailure { reason: String },

    #[error("measure and pseudo-cone were built over different cones")]
    ConeMismatch,

    #[error("pseudo-cone directions do not match the target measure atoms")]
    DirectionMismatch,

    #[error(
        "solver stopped after {iterations} iterations with residual {residual:.3e} > tol {tol:.3e}"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("measure has a zero, negative or non-finite weight or total mass")]
    MassZero,

    #[error("grid would enumerate {points} points, above the 1e7 guard")]
    GridTooLarge { points: u128 },

    #[error("grid search supports at most {limit} log-radius coordinates, got {got}")]
    GridDimension { got: usize, limit: usize },

    #[error("atom {atom} is tied at tolerance {tol:.1e}; pick a non-tied point")]
    TiedPoint { atom: usize, tol: f64 },

    #[error("{pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(context: impl Into<String>) -> Self {
        Error::DomainViolation {
            context: context.into(),
        }
    }

    pub(crate) fn parse(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
