//! Certified iteration of the rotation `R_α` and the cylinder flow
//! `T_α(x, m) = (x + α, m + f(x))`.
//!
//! Positions are never held as floating point. Each step is decided either by
//! a fixed-point bracket with a proven error bound or, when that bracket
//! straddles a boundary, by an exact rational comparison against a
//! convergent bracket of `α`.

mod certified;
mod orbit;
mod trace;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use certified::{certify_compare, CertifiedReal, Comparison};
pub use orbit::Orbit;
pub use trace::{read_rle, LevelTrace, TraceFormat};

use crate::cf::CfError;

/// Default cap on brute-force iteration.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DynamicsError {
    #[error("comparison undecidable at depth {depth} (step {step}): source precision exhausted")]
    Undecidable { depth: usize, step: u64 },
    #[error("rotation number needs at least one partial quotient")]
    EmptySource,
    #[error("{requested} steps exceed the brute-force budget of {budget}")]
    BudgetExceeded { requested: String, budget: u64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Cf(#[from] CfError),
}

/// A base point `offset + m·α (mod 1)` with rational `offset` in `[0, 1)`.
///
/// Plain rational points have `m = 0`; the orbit of `α` itself is the point
/// `0 + 1·α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    offset: BigRational,
    alpha_multiple: u64,
}

impl Point {
    pub fn rational(offset: BigRational) -> Result<Self, DynamicsError> {
        if offset.is_negative() || offset >= BigRational::one() {
            return Err(DynamicsError::Domain(format!("x = {offset} outside [0,1)")));
        }
        Ok(Self {
            offset,
            alpha_multiple: 0,
        })
    }

    pub fn ratio(num: i64, den: i64) -> Result<Self, DynamicsError> {
        if den == 0 {
            return Err(DynamicsError::Domain("zero denominator".into()));
        }
        Self::rational(BigRational::new(num.into(), den.into()))
    }

    pub fn zero() -> Self {
        Self {
            offset: BigRational::zero(),
            alpha_multiple: 0,
        }
    }

    /// The point `mα (mod 1)`.
    pub fn alpha_multiple_of(m: u64) -> Self {
        Self {
            offset: BigRational::zero(),
            alpha_multiple: m,
        }
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    pub fn alpha_multiple(&self) -> u64 {
        self.alpha_multiple
    }

    /// The point reached after `k` rotations.
    pub fn advanced(&self, k: u64) -> Self {
        Self {
            offset: self.offset.clone(),
            alpha_multiple: self.alpha_multiple + k,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha_multiple {
            0 => write!(f, "{}", self.offset),
            1 if self.offset.is_zero() => write!(f, "alpha"),
            m if self.offset.is_zero() => write!(f, "{m}alpha"),
            m => write!(f, "{}+{m}alpha", self.offset),
        }
    }
}

impl std::str::FromStr for Point {
    type Err = DynamicsError;

    /// `3/10`, `alpha`, `2alpha` or `1/4+3alpha`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DynamicsError::Domain(format!("bad point {s:?}"));
        let parse_multiple = |t: &str| -> Result<u64, DynamicsError> {
            let digits = t.strip_suffix("alpha").ok_or_else(bad)?;
            if digits.is_empty() {
                Ok(1)
            } else {
                digits.parse().map_err(|_| bad())
            }
        };
        let (offset, multiple) = match s.split_once('+') {
            Some((x, m)) => (x.parse::<BigRational>().map_err(|_| bad())?, parse_multiple(m)?),
            None if s.ends_with("alpha") => (BigRational::zero(), parse_multiple(s)?),
            None => (s.parse::<BigRational>().map_err(|_| bad())?, 0),
        };
        Ok(Self::rational(offset)?.advanced(multiple))
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

/// `f(x + kα)`: `+1` on the closed half circle `[0, 1/2]`, `-1` elsewhere.
pub fn f_value(alpha: &mut CertifiedReal, k: u64, x: &BigRational) -> Result<i64, DynamicsError> {
    Ok(match certify_compare(alpha, k, x, &half())? {
        Ordering::Greater => -1,
        _ => 1,
    })
}

/// `f` at `point + kα`.
pub fn f_at(alpha: &mut CertifiedReal, point: &Point, k: u64) -> Result<i64, DynamicsError> {
    Ok(match alpha.compare_position(point, k, &half())? {
        Ordering::Greater => -1,
        _ => 1,
    })
}

/// `q_n` as a step count, subject to `budget`.
pub fn q_steps(alpha: &mut CertifiedReal, n: usize, budget: u64) -> Result<u64, DynamicsError> {
    let q = alpha.convergent_at(n)?.q;
    match q.to_u64() {
        Some(steps) if steps <= budget => Ok(steps),
        _ => Err(DynamicsError::BudgetExceeded {
            requested: q.to_string(),
            budget,
        }),
    }
}

/// The levels `ℓ_k = π₂(T^k(x, 0))` for `k = 1..=n`.
pub fn iterate_levels(alpha: &CertifiedReal, point: &Point, n: u64) -> Result<LevelTrace, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Domain("trace length must be at least 1".into()));
    }
    let orbit = Orbit::new(alpha, point.clone())?;
    let levels = orbit.take(n as usize).collect::<Result<Vec<_>, _>>()?;
    Ok(LevelTrace::new(
        alpha.source().to_string(),
        point.clone(),
        levels,
    ))
}

/// `π₂(T^{q_n}(x, 0))`.
pub fn level_at_qn(
    alpha: &mut CertifiedReal,
    point: &Point,
    n: usize,
    budget: u64,
) -> Result<i64, DynamicsError> {
    let steps = q_steps(alpha, n, budget)?;
    let mut orbit = Orbit::new(alpha, point.clone())?;
    for _ in 0..steps {
        orbit.advance()?;
    }
    Ok(orbit.level())
}

/// `max_{1 <= i <= q_n} |ℓ_i|`.
pub fn max_abs_level(
    alpha: &mut CertifiedReal,
    point: &Point,
    n: usize,
    budget: u64,
) -> Result<i64, DynamicsError> {
    let steps = q_steps(alpha, n, budget)?;
    let mut orbit = Orbit::new(alpha, point.clone())?;
    let mut max = 0;
    for _ in 0..steps {
        max = max.max(orbit.advance()?.abs());
    }
    Ok(max)
}

/// Checks that each interval `[x + j/q_n, x + (j+1)/q_n)` (mod 1) holds
/// exactly one of the points `x + iα`, `i = 1..=q_n`.
///
/// Translating by `-x` maps the intervals onto `[j/q_n, (j+1)/q_n)` and the
/// points onto `frac(iα)`, so no interval straddles the seam at 1. The index
/// `j` of each point is read from the fixed-point bracket when it is
/// unambiguous and otherwise certified by comparing against `j/q_n`.
pub fn check_one_per_interval(
    alpha: &mut CertifiedReal,
    _point: &Point,
    n: usize,
    budget: u64,
) -> Result<bool, DynamicsError> {
    let q = q_steps(alpha, n, budget)?;
    if q == 0 {
        return Ok(true);
    }
    alpha.refine_to_width(160)?;
    let origin = Point::zero();
    let mut track = orbit::FixedTrack::new(alpha, &origin);
    let mut seen = vec![false; q as usize];
    for i in 1..=q {
        if let Some(t) = track.as_mut() {
            t.advance();
        }
        let fast = track
            .as_ref()
            .and_then(|t| t.interval())
            .and_then(|(lo, hi)| {
                let j = orbit::mul_high(q, lo);
                (j == orbit::mul_high(q, hi)).then_some(j as u64)
            });
        let j = match fast {
            Some(j) => j,
            None => locate_cell(alpha, i, q)?,
        };
        let slot = &mut seen[j as usize];
        if *slot {
            return Ok(false);
        }
        *slot = true;
    }
    Ok(seen.iter().all(|&s| s))
}

/// `floor(q · frac(iα))` by bisection over exact comparisons.
fn locate_cell(alpha: &mut CertifiedReal, i: u64, q: u64) -> Result<u64, DynamicsError> {
    let origin = Point::zero();
    let (mut lo, mut hi) = (0u64, q);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let threshold = BigRational::new(mid.into(), q.into());
        match alpha.compare_position(&origin, i, &threshold)? {
            Ordering::Less => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(lo)
}
