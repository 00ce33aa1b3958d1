use thiserror::Error;

/// Errors raised by the analysis routines.
///
/// Soft conditions (criss-cross non-convergence, noise scales hitting the
/// floor) are reported through flags on the returned values instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeappError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariate matrix is rank deficient")]
    RankDeficientCovariates,
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("primary variable is not a unit vector (norm {0})")]
    NotUnitVector(f64),
    #[error("invalid rank {rank}: {reason}")]
    InvalidRank { rank: usize, reason: String },
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("regression design is singular")]
    SingularDesign,
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("all values are equal; scale estimate is zero")]
    ZeroSpread,
    #[error("insufficient residual degrees of freedom (n - s - k = {0})")]
    InsufficientDf(i64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("truth labels need at least one positive and one negative")]
    DegenerateTruth,
    #[error("zero vector")]
    ZeroVector,
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("linear program infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, LeappError>;
