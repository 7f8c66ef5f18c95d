//! Fixed-point interval arithmetic with directed rounding.
//!
//! An [`Enclosure`] stores a lower and an upper bound as integers scaled by
//! `2^-WORKING_BITS`. Lower bounds are always rounded toward minus infinity
//! and upper bounds toward plus infinity, so the true value is never lost.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Fractional bits carried by every enclosure.
pub const WORKING_BITS: u32 = 128;

/// Guard bits used inside series evaluations.
const GUARD_BITS: u32 = 64;

/// An exponent `num/den` in `(0, 1]`, used for sums of `n^-δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exponent {
    num: u32,
    den: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExponentError {
    #[error("exponent {0} is not a fraction num/den with 0 < num <= den")]
    Malformed(String),
    #[error("exponent {0} outside (1/2, 1]")]
    OutOfRange(String),
}

impl Exponent {
    pub const ONE: Exponent = Exponent { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, ExponentError> {
        if num == 0 || den == 0 || num > den {
            return Err(ExponentError::Malformed(format!("{num}/{den}")));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// Accepts exponents in `(1/2, 1]` only.
    pub fn balanced(num: u32, den: u32) -> Result<Self, ExponentError> {
        let e = Self::new(num, den)?;
        if 2 * e.num <= e.den {
            return Err(ExponentError::OutOfRange(e.to_string()));
        }
        Ok(e)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.into(), self.den.into())
    }

    pub fn to_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Exponent {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExponentError::Malformed(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Exponent::balanced(num, den)
    }
}

fn shift_floor(value: &BigInt, bits: u32) -> BigInt {
    // Arithmetic shift on BigInt rounds toward minus infinity.
    value >> bits
}

fn shift_ceil(value: &BigInt, bits: u32) -> BigInt {
    -((-value) >> bits)
}

fn div_ceil_big(n: &BigInt, d: &BigInt) -> BigInt {
    -((-n).div_floor(d))
}

/// Floor and ceiling of the `k`-th root of a non-negative integer.
fn root_bounds(value_lo: &BigUint, value_hi: &BigUint, k: u32) -> (BigUint, BigUint) {
    let lo = value_lo.nth_root(k);
    let mut hi = value_hi.nth_root(k);
    if &hi.pow(k) < value_hi {
        hi += 1u32;
    }
    (lo, hi)
}

/// A closed interval `[lo, hi] * 2^-WORKING_BITS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    lo: BigInt,
    hi: BigInt,
}

impl Enclosure {
    /// Endpoints scaled by `2^WORKING_BITS`.
    pub(crate) fn from_scaled(lo: BigInt, hi: BigInt) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub(crate) fn scaled(&self) -> (&BigInt, &BigInt) {
        (&self.lo, &self.hi)
    }

    pub fn zero() -> Self {
        Self {
            lo: BigInt::zero(),
            hi: BigInt::zero(),
        }
    }

    pub fn from_integer(value: &BigInt) -> Self {
        let scaled = value << WORKING_BITS;
        Self {
            lo: scaled.clone(),
            hi: scaled,
        }
    }

    pub fn from_u64(value: u64) -> Self {
        Self::from_integer(&BigInt::from(value))
    }

    pub fn from_rational(value: &BigRational) -> Self {
        let scaled = value.numer() << WORKING_BITS;
        Self {
            lo: scaled.div_floor(value.denom()),
            hi: div_ceil_big(&scaled, value.denom()),
        }
    }

    /// Builds an enclosure from rational bounds.
    pub fn between(lo: &BigRational, hi: &BigRational) -> Self {
        assert!(lo <= hi, "inverted bounds");
        Self {
            lo: Self::from_rational(lo).lo,
            hi: Self::from_rational(hi).hi,
        }
    }

    /// Hull of two enclosures.
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn lower(&self) -> BigRational {
        BigRational::new(self.lo.clone(), BigInt::one() << WORKING_BITS)
    }

    pub fn upper(&self) -> BigRational {
        BigRational::new(self.hi.clone(), BigInt::one() << WORKING_BITS)
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower().to_f64().unwrap_or(f64::NAN)
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper().to_f64().unwrap_or(f64::NAN)
    }

    pub fn midpoint_f64(&self) -> f64 {
        ((&self.lo + &self.hi).to_f64().unwrap_or(f64::NAN)) / 2f64.powi(WORKING_BITS as i32 + 1)
    }

    pub fn width(&self) -> BigRational {
        self.upper() - self.lower()
    }

    pub fn contains(&self, value: &BigRational) -> bool {
        &self.lower() <= value && value <= &self.upper()
    }

    pub fn is_nonnegative(&self) -> bool {
        !self.lo.is_negative()
    }

    /// Every point of `self` is strictly below every point of `other`.
    pub fn certainly_lt(&self, other: &Self) -> bool {
        self.hi < other.lo
    }

    /// Every point of `self` is at most every point of `other`.
    pub fn certainly_le(&self, other: &Self) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_below(&self, value: &BigRational) -> bool {
        &self.upper() < value
    }

    pub fn mul_integer(&self, k: &BigUint) -> Self {
        let k = BigInt::from(k.clone());
        Self {
            lo: &self.lo * &k,
            hi: &self.hi * &k,
        }
    }

    pub fn div_integer(&self, k: &BigUint) -> Self {
        assert!(!k.is_zero(), "division by zero");
        let k = BigInt::from(k.clone());
        Self {
            lo: self.lo.div_floor(&k),
            hi: div_ceil_big(&self.hi, &k),
        }
    }

    /// Product of two non-negative enclosures.
    pub fn mul(&self, other: &Self) -> Self {
        assert!(
            self.is_nonnegative() && other.is_nonnegative(),
            "mul is defined for non-negative enclosures"
        );
        Self {
            lo: shift_floor(&(&self.lo * &other.lo), WORKING_BITS),
            hi: shift_ceil(&(&self.hi * &other.hi), WORKING_BITS),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    /// `(num / den)^(p/q)` for positive integers.
    pub fn ratio_pow(num: &BigUint, den: &BigUint, p: u32, q: u32) -> Self {
        assert!(!num.is_zero() && !den.is_zero() && q > 0);
        let top = num.pow(p) << (WORKING_BITS * q);
        let bottom = den.pow(p);
        let (floor, rem) = top.div_rem(&bottom);
        let ceil = if rem.is_zero() { floor.clone() } else { &floor + 1u32 };
        let (lo, hi) = root_bounds(&floor, &ceil, q);
        Self {
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    /// `n^-δ`.
    pub fn inv_pow(n: &BigUint, delta: Exponent) -> Self {
        Self::ratio_pow(&BigUint::one(), n, delta.num, delta.den)
    }

    /// `n^e` for an exponent `e` in `(0, 1]`.
    pub fn pow(n: &BigUint, e: Exponent) -> Self {
        Self::ratio_pow(n, &BigUint::one(), e.num, e.den)
    }

    /// Natural logarithm of a positive integer.
    pub fn ln(n: &BigUint) -> Self {
        assert!(!n.is_zero(), "ln(0)");
        let e = n.bits() - 1;
        let base = BigUint::one() << e;
        let (m_lo, m_hi) = atanh2_series(&(n - &base), &(n + &base));
        let (l2_lo, l2_hi) = ln2_fixed();
        let e = BigInt::from(e);
        let lo = &e * l2_lo + m_lo;
        let hi = &e * l2_hi + m_hi;
        Self {
            lo: shift_floor(&lo, GUARD_BITS),
            hi: shift_ceil(&hi, GUARD_BITS),
        }
    }

    /// Decimal bounds rounded outward to `digits` fractional digits.
    pub fn to_decimal_bounds(&self, digits: u32) -> (String, String) {
        let scale = BigInt::from(10u32).pow(digits);
        let lo = shift_floor(&(&self.lo * &scale), WORKING_BITS);
        let hi = shift_ceil(&(&self.hi * &scale), WORKING_BITS);
        (format_fixed(&lo, digits), format_fixed(&hi, digits))
    }
}

fn format_fixed(value: &BigInt, digits: u32) -> String {
    let sign = if value.sign() == Sign::Minus { "-" } else { "" };
    let mag = value.magnitude().to_string();
    let digits = digits as usize;
    let padded = format!("{mag:0>width$}", width = digits + 1);
    let (int, frac) = padded.split_at(padded.len() - digits);
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// `2 atanh(num/den)` for `0 <= num/den <= 1/3`, scaled by
/// `2^(WORKING_BITS + GUARD_BITS)`, as (floor, ceil) bounds.
fn atanh2_series(num: &BigUint, den: &BigUint) -> (BigInt, BigInt) {
    debug_assert!(num * 3u32 <= *den);
    let w = WORKING_BITS + GUARD_BITS;
    let num = BigInt::from(num.clone());
    let den = BigInt::from(den.clone());
    let scaled = &num << w;
    let z_lo = scaled.div_floor(&den);
    let z_hi = div_ceil_big(&scaled, &den);
    let z2_lo = shift_floor(&(&z_lo * &z_lo), w);
    let z2_hi = shift_ceil(&(&z_hi * &z_hi), w);
    let (mut t_lo, mut t_hi) = (z_lo, z_hi);
    let (mut sum_lo, mut sum_hi) = (BigInt::zero(), BigInt::zero());
    let mut j: u32 = 0;
    while t_hi > BigInt::one() {
        let d = BigInt::from(2 * j + 1);
        sum_lo += t_lo.div_floor(&d);
        sum_hi += div_ceil_big(&t_hi, &d);
        t_lo = shift_floor(&(&t_lo * &z2_lo), w);
        t_hi = shift_ceil(&(&t_hi * &z2_hi), w);
        j += 1;
    }
    // Remaining terms are bounded by t / (1 - z^2) <= 9t/8 with z <= 1/3.
    sum_hi += div_ceil_big(&(&t_hi * 9), &BigInt::from(8)) + 1;
    (sum_lo * 2, sum_hi * 2)
}

fn ln2_fixed() -> (BigInt, BigInt) {
    atanh2_series(&BigUint::one(), &BigUint::from(3u32))
}

impl Add for &Enclosure {
    type Output = Enclosure;

    fn add(self, rhs: &Enclosure) -> Enclosure {
        Enclosure {
            lo: &self.lo + &rhs.lo,
            hi: &self.hi + &rhs.hi,
        }
    }
}

impl Add for Enclosure {
    type Output = Enclosure;

    fn add(self, rhs: Enclosure) -> Enclosure {
        &self + &rhs
    }
}

impl AddAssign<&Enclosure> for Enclosure {
    fn add_assign(&mut self, rhs: &Enclosure) {
        self.lo += &rhs.lo;
        self.hi += &rhs.hi;
    }
}

impl std::iter::Sum for Enclosure {
    fn sum<I: Iterator<Item = Enclosure>>(iter: I) -> Self {
        iter.fold(Enclosure::zero(), |acc, e| acc + e)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.to_decimal_bounds(12);
        write!(f, "[{lo}, {hi}]")
    }
}

/// Serialized as decimal bounds with 30 fractional digits.
impl Serialize for Enclosure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let (lo, hi) = self.to_decimal_bounds(30);
        let mut s = serializer.serialize_struct("Enclosure", 2)?;
        s.serialize_field("lower", &lo)?;
        s.serialize_field("upper", &hi)?;
        s.end()
    }
}
