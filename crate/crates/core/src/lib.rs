//! Exact experiments on balanced times of irrational circle rotations.
//!
//! The crate follows the cylinder flow `T(x, m) = (x + α mod 1, m + f(x))`
//! where `f = +1` on the closed half circle `[0, 1/2]` and `-1` elsewhere,
//! and studies the times at which the level returns to zero.
//!
//! * [`cf`]: continued fractions with arbitrary-precision integers.
//! * [`dynamics`]: certified comparisons and orbit levels.
//! * [`balanced`]: balanced-time sets, occupancy and reciprocal sums.
//! * [`renorm`]: stack-and-shift peak histograms for `α = [2a₁, b₁, 2a₂, b₂, ...]`
//!   and the resulting convergence bounds.
//! * [`seqtools`]: upper densities and the subset-sum criterion.
//! * [`experiments`]: seeded Monte-Carlo harnesses.

pub mod balanced;
pub mod cf;
pub mod decimal;
pub mod dynamics;
pub mod enclosure;
pub mod experiments;
pub mod output;
pub mod renorm;
pub mod seqtools;
