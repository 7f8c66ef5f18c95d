use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{DynamicsError, Point};
use crate::cf::{Convergent, Convergents, PartialQuotientSource};

/// A rotation number known through a bracket of consecutive convergents.
///
/// Refinement only narrows the bracket, so a comparison decided at one depth
/// keeps its answer at every later depth.
#[derive(Debug, Clone)]
pub struct CertifiedReal {
    source: PartialQuotientSource,
    stream: Convergents,
    convergents: Vec<Convergent>,
    exhausted: bool,
}

/// Position of `x + kα mod 1` relative to a threshold.
pub type Comparison = Ordering;

impl CertifiedReal {
    /// Starts at depth 1, where the bracket is `(0, 1/a_1)`.
    pub fn new(source: &PartialQuotientSource) -> Result<Self, DynamicsError> {
        if source.is_empty() {
            return Err(DynamicsError::EmptySource);
        }
        let mut real = Self {
            source: source.clone(),
            stream: Convergents::new(source),
            convergents: Vec::new(),
            exhausted: false,
        };
        real.pull()?;
        real.pull()?;
        Ok(real)
    }

    fn pull(&mut self) -> Result<bool, DynamicsError> {
        if self.exhausted {
            return Ok(false);
        }
        match self.stream.next() {
            Some(Ok(c)) => {
                self.convergents.push(c);
                Ok(true)
            }
            Some(Err(crate::cf::CfError::DepthUnavailable { .. })) | None => {
                self.exhausted = true;
                Ok(false)
            }
            Some(Err(e)) => Err(e.into()),
        }
    }

    pub fn source(&self) -> &PartialQuotientSource {
        &self.source
    }

    pub fn depth(&self) -> usize {
        self.convergents.len() - 1
    }

    pub fn convergent(&self, n: usize) -> Option<&Convergent> {
        self.convergents.get(n)
    }

    /// True once the whole of a finite explicit source has been consumed, at
    /// which point the bracket collapses to the exact rational.
    pub fn is_exact(&self) -> bool {
        self.exhausted && self.source.is_exact_rational()
    }

    /// True when no further refinement is possible.
    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// The bracket `(lo, hi)`; `lo == hi` only when [`is_exact`] holds.
    pub fn bracket(&self) -> (BigRational, BigRational) {
        let n = self.depth();
        let last = self.convergents[n].to_rational();
        if self.is_exact() {
            return (last.clone(), last);
        }
        let prev = self.convergents[n - 1].to_rational();
        if prev < last {
            (prev, last)
        } else {
            (last, prev)
        }
    }

    /// Doubles the depth, capped by what the source can supply. Returns false
    /// when the bracket could not be narrowed.
    pub fn refine(&mut self) -> Result<bool, DynamicsError> {
        let target = self.depth() * 2;
        self.refine_to(target)
    }

    pub fn refine_to(&mut self, depth: usize) -> Result<bool, DynamicsError> {
        let mut progressed = false;
        while self.depth() < depth {
            if !self.pull()? {
                break;
            }
            progressed = true;
        }
        Ok(progressed)
    }

    /// Refines until `q_{n-1} q_n >= 2^bits` (bracket width at most `2^-bits`)
    /// or the source runs out.
    pub fn refine_to_width(&mut self, bits: u64) -> Result<(), DynamicsError> {
        loop {
            let n = self.depth();
            let product = &self.convergents[n - 1].q * &self.convergents[n].q;
            if product.bits() > bits || self.exhausted {
                return Ok(());
            }
            if !self.pull()? {
                return Ok(());
            }
        }
    }

    /// The convergent `p_n / q_n`, pulling further quotients when needed.
    pub fn convergent_at(&mut self, n: usize) -> Result<Convergent, DynamicsError> {
        self.refine_to(n)?;
        self.convergents.get(n).cloned().ok_or(DynamicsError::Cf(
            crate::cf::CfError::DepthUnavailable {
                requested: n,
                available: self.depth(),
            },
        ))
    }

    /// Orders `frac(point + kα)` against `threshold` exactly.
    pub fn compare_position(
        &mut self,
        point: &Point,
        k: u64,
        threshold: &BigRational,
    ) -> Result<Comparison, DynamicsError> {
        let multiple = point.alpha_multiple() + k;
        let offset = point.offset();
        if multiple == 0 {
            return Ok(offset.cmp(threshold));
        }
        let m = BigRational::from(BigInt::from(multiple));
        loop {
            let (lo, hi) = self.bracket();
            let low = offset + &m * &lo;
            if self.is_exact() {
                let frac = &low - low.floor();
                return Ok(frac.cmp(threshold));
            }
            let high = offset + &m * &hi;
            let base = low.floor();
            if base == high.floor() {
                // The true position lies strictly inside (low, high).
                if &(&high - &base) <= threshold {
                    return Ok(Ordering::Less);
                }
                if &(&low - &base) >= threshold {
                    return Ok(Ordering::Greater);
                }
            } else if high.is_integer() && high.floor() == &base + BigRational::one() {
                // frac lies in (low - base, 1); an upper endpoint that is an
                // integer never contains the position itself.
                if &(&low - &base) >= threshold {
                    return Ok(Ordering::Greater);
                }
            }
            if !self.refine()? && !self.is_exact() {
                return Err(DynamicsError::Undecidable {
                    depth: self.depth(),
                    step: k,
                });
            }
        }
    }
}

/// Orders `frac(x + kα)` against `threshold`, refining the bracket of `alpha`
/// until the answer is certain. `Equal` only occurs for `k = 0` or an exact
/// rational `alpha`.
pub fn certify_compare(
    alpha: &mut CertifiedReal,
    k: u64,
    x: &BigRational,
    threshold: &BigRational,
) -> Result<Comparison, DynamicsError> {
    let point = Point::rational(x.clone())?;
    if threshold < &BigRational::zero() || threshold >= &BigRational::one() {
        return Err(DynamicsError::Domain(format!("threshold {threshold} outside [0,1)")));
    }
    alpha.compare_position(&point, k, threshold)
}
