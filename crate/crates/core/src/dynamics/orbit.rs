use std::cmp::Ordering;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{CertifiedReal, DynamicsError, Point};

/// Bits of bracket width requested before the fixed-point path is armed.
const FAST_PATH_BITS: u64 = 160;

/// Widths beyond this make the fixed-point path useless.
const MAX_FAST_WIDTH: u128 = 1 << 100;

/// Floor of `value * 2^128` reduced mod `2^128`, and whether it was exact.
pub(crate) fn fixed_floor(value: &BigRational) -> (u128, bool) {
    let scaled = value.numer() << 128u32;
    let (q, r) = scaled.div_mod_floor(value.denom());
    let modulus = BigUint::from(1u8) << 128u32;
    let reduced = q.mod_floor(&modulus.into());
    (reduced.to_u128().expect("reduced below 2^128"), r.is_zero())
}

/// `floor(q * v / 2^128)` for a 64-bit `q`.
pub(crate) fn mul_high(q: u64, v: u128) -> u128 {
    let hi = v >> 64;
    let lo = v & u128::from(u64::MAX);
    let q = u128::from(q);
    (q * hi + ((q * lo) >> 64)) >> 64
}

/// A lower bound and width for `frac(x + kα) * 2^128`, advanced by `k`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FixedTrack {
    lo: u128,
    width: u128,
    alpha_lo: u128,
    alpha_width: u128,
}

impl FixedTrack {
    /// Returns `None` when the bracket of `alpha` is too wide to be useful.
    pub(crate) fn new(alpha: &CertifiedReal, point: &Point) -> Option<Self> {
        let (lo, hi) = alpha.bracket();
        let (alpha_lo, _) = fixed_floor(&lo);
        let (hi_floor, hi_exact) = fixed_floor(&hi);
        let hi_ceil = if hi_exact { hi_floor } else { hi_floor.wrapping_add(1) };
        let alpha_width = hi_ceil.wrapping_sub(alpha_lo);
        if alpha_width > MAX_FAST_WIDTH {
            return None;
        }
        let (x_lo, x_exact) = fixed_floor(point.offset());
        let m = u128::from(point.alpha_multiple());
        Some(Self {
            lo: x_lo.wrapping_add(m.wrapping_mul(alpha_lo)),
            width: u128::from(!x_exact).saturating_add(m.saturating_mul(alpha_width)),
            alpha_lo,
            alpha_width,
        })
    }

    #[inline]
    pub(crate) fn advance(&mut self) {
        self.lo = self.lo.wrapping_add(self.alpha_lo);
        self.width = self.width.saturating_add(self.alpha_width);
    }

    /// `Some(lo)` when `[lo, lo + width]` does not wrap past 1.
    #[inline]
    pub(crate) fn interval(&self) -> Option<(u128, u128)> {
        if self.width > MAX_FAST_WIDTH {
            return None;
        }
        self.lo.checked_add(self.width).map(|hi| (self.lo, hi))
    }

    /// Certified `f` at the current position, if the interval decides it.
    #[inline]
    pub(crate) fn f_value(&self) -> Option<i64> {
        const HALF: u128 = 1 << 127;
        let (lo, hi) = self.interval()?;
        if hi <= HALF {
            Some(1)
        } else if lo > HALF {
            Some(-1)
        } else {
            None
        }
    }
}

/// The cylinder-flow orbit of `(point, 0)`, yielding the levels `ℓ_1, ℓ_2, ...`.
///
/// Steps are decided by a fixed-point bracket of the position carrying a
/// rigorous error bound; a step the bracket cannot decide is settled by the
/// exact comparison in [`CertifiedReal::compare_position`].
#[derive(Debug, Clone)]
pub struct Orbit {
    alpha: CertifiedReal,
    point: Point,
    step: u64,
    level: i64,
    fast: Option<FixedTrack>,
    exact_steps: u64,
}

impl Orbit {
    pub fn new(alpha: &CertifiedReal, point: Point) -> Result<Self, DynamicsError> {
        let mut alpha = alpha.clone();
        alpha.refine_to_width(FAST_PATH_BITS)?;
        let fast = FixedTrack::new(&alpha, &point);
        Ok(Self {
            alpha,
            point,
            step: 0,
            level: 0,
            fast,
            exact_steps: 0,
        })
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    /// Number of steps taken so far; [`level`](Self::level) is `ℓ_{steps}`.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// Steps that needed the exact comparison.
    pub fn exact_steps(&self) -> u64 {
        self.exact_steps
    }

    fn f_exact(&mut self) -> Result<i64, DynamicsError> {
        self.exact_steps += 1;
        let half = BigRational::new(1.into(), 2.into());
        Ok(match self.alpha.compare_position(&self.point, self.step, &half)? {
            Ordering::Greater => -1,
            _ => 1,
        })
    }

    /// Advances one step and returns the new level.
    #[inline]
    pub fn advance(&mut self) -> Result<i64, DynamicsError> {
        let f = match self.fast.as_ref().and_then(FixedTrack::f_value) {
            Some(f) => f,
            None => self.f_exact()?,
        };
        if let Some(track) = self.fast.as_mut() {
            track.advance();
        }
        self.step += 1;
        self.level += f;
        Ok(self.level)
    }
}

impl Iterator for Orbit {
    type Item = Result<i64, DynamicsError>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.advance())
    }
}
