//! Stack-and-shift renormalization for `α = [2a_1, b_1, 2a_2, b_2, ...]`.
//!
//! The orbit of `(α, 0)` through time `q_{2n+2}` is assembled from shifted
//! copies of its first `q_{2n}` steps, so the level histogram of that block
//! follows from the previous one in `O(A_n)` work, however large `q_{2n}` is.

mod bound;
mod histogram;
mod schedule;

pub use bound::{
    convergence_bound, convergence_bound_with_budget, BlockBound, BoundMode, ConvergenceBound, TailCertificate,
    EXACT_SUM_LIMIT,
};
pub use histogram::{
    brute_force_histogram, hit_envelope, max_hits, peak_histogram, peak_histogram_with_budget, peak_histograms,
    peak_support, zero_hit_window_bound, MaxHits, PeakHistogram, SupportProfile, WindowBound, DEFAULT_LEVEL_BUDGET,
};
pub use schedule::{generate_schedule, CSequence, GrowthRule, PeakSchedule};

use crate::cf::CfError;
use crate::dynamics::DynamicsError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenormError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule has depth {available}, depth {requested} requested")]
    DepthUnavailable { requested: usize, available: usize },
    #[error("{levels} levels exceed the histogram budget of {budget}")]
    LevelBudget { levels: String, budget: u64 },
    #[error("exponent {0} outside (1/2, 1]")]
    ExponentOutOfRange(String),
    #[error("schedule infeasible at depth {depth}: {reason}")]
    Infeasible { depth: usize, reason: String },
    #[error("brute-force oracle: {0}")]
    Oracle(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Cf(#[from] CfError),
}

#[cfg(test)]
mod tests;
