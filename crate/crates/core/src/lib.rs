//! Extremes of ensembles of independent random walks.
//!
//! The crate covers step laws and their samplers, norming constants for the
//! Gumbel and Fréchet limits of ensemble maxima, large-deviation
//! approximations of single-walk tails, reproducible parallel Monte Carlo
//! experiments and the goodness-of-fit statistics used to check them.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod ldtheory;
pub mod norming;
pub mod parallel;
pub mod rng;
pub mod scenarios;
pub mod simulate;
pub mod stats;

pub use distributions::{LawError, LawKind, StepLaw};
pub use ldtheory::{ApproxError, LimitLaw, MCTailEstimate, TailApprox};
pub use norming::{NormingError, NormingPair, Regime, Slack, TailClass};
pub use simulate::{EnsembleSummary, ExperimentPlan, IndexLaw, SimError};
pub use stats::{GofReport, StatsError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Norming(#[from] NormingError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}
