use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: dimensions, text format, preconditions, configuration.
    Validation,
    /// A well-posed computation that could not produce a finite answer.
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("h = {h} is outside the analytic validity window [{lo}, {hi}]")]
    OutOfValidity { h: f64, lo: f64, hi: f64 },

    #[error("h estimation failed: no invertible variable among {attempted:?}")]
    EstimationFailure { attempted: Vec<String> },

    #[error("no swap possible: grid has no A/B pair")]
    NoSwapPossible,

    #[error("conditioning on a zero-probability blanket state {0}")]
    ConditioningOnNull(usize),

    #[error("divergence is infinite: outcome {0} has q > 0 but p = 0")]
    DivergenceInfinite(usize),

    #[error("surprisal is infinite: blanket state {0} has zero probability")]
    InfiniteSurprisal(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot fit a model to a uniform grid")]
    CannotFit,

    #[error("grid with {cells} cells exceeds the enumeration limit of {limit}")]
    TooLarge { cells: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Singularity(_)
            | Error::EstimationFailure { .. }
            | Error::DivergenceInfinite(_)
            | Error::InfiniteSurprisal(_)
            | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
