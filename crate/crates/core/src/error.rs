//! Crate-wide error type.

use thiserror::Error;

use crate::solvers::CondExpResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a probability space needs at least one outcome")]
    EmptyOutcomes,
    #[error("weight {weight} at outcome {index} is negative")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weight {weight} at outcome {index} is not finite")]
    NonFiniteWeight { index: usize, weight: f64 },
    #[error("weights must have positive total mass")]
    ZeroTotalMass,
    #[error("{labels} labels supplied for {outcomes} outcomes")]
    LabelCountMismatch { labels: usize, outcomes: usize },
    #[error("value {value} at outcome {index} is not finite")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("expected {expected} outcomes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("outcome index {index} out of range for {size} outcomes")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("sigma-algebras partition different spaces ({left} vs {right} outcomes)")]
    SizeMismatch { left: usize, right: usize },
    #[error("atom {index} of the partition is empty")]
    EmptyAtom { index: usize },
    #[error("outcome {outcome} appears in more than one atom")]
    OverlappingAtoms { outcome: usize },
    #[error("outcome {outcome} is not covered by any atom")]
    UncoveredOutcome { outcome: usize },
    #[error("{what} is not measurable with respect to the sigma-algebra")]
    NotMeasurable { what: String },
    #[error("directional quotient is undefined at step 0")]
    ZeroStep,
    #[error("invalid step sizes: {reason}")]
    InvalidSteps { reason: String },
    #[error("invalid gradient configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("basis element {index} is not measurable with respect to the sigma-algebra")]
    BasisNotMeasurable { index: usize },
    #[error("basis spans a subspace of rank {rank}, need {needed} to cover every non-null atom")]
    BasisDoesNotSpan { rank: usize, needed: usize },
    #[error("gram solve failed: {reason}")]
    GramSolveFailed { reason: String },
    #[error(
        "gradient descent did not converge: gradient norm {gradient_norm:e} after {iterations} iterations"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        /// Last iterate, so callers can inspect or report the partial result.
        last: Box<CondExpResult>,
    },
    #[error("staircase level must be between 1 and 53, got {level}")]
    InvalidLevel { level: usize },
    #[error("truncation bound must be positive and finite, got {bound}")]
    NonPositiveBound { bound: f64 },
    #[error("truncation schedule must be strictly increasing and positive")]
    InvalidSchedule,
    #[error("the second sigma-algebra does not coarsen the first")]
    NotRefinement,
}
