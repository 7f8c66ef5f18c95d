//! Balanced times `V_{α,x}(N) = {1 <= n <= N : ℓ_n = 0}`, level occupancy and
//! reciprocal sums over balanced times.

use std::collections::BTreeMap;
use std::io::{self, Write};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::cf::quotient_sums;
use crate::dynamics::{CertifiedReal, DynamicsError, Orbit, Point, DEFAULT_BUDGET};
use crate::enclosure::{Enclosure, Exponent};

/// Horizons above this are summarized without storing the times.
pub const LIST_LIMIT: u64 = 1_000_000;

fn check_budget(n: u64, budget: u64) -> Result<(), DynamicsError> {
    if n > budget {
        return Err(DynamicsError::BudgetExceeded {
            requested: n.to_string(),
            budget,
        });
    }
    Ok(())
}

/// The balanced times of one orbit up to a horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalancedSet {
    alpha: String,
    #[serde(serialize_with = "serialize_display")]
    x: Point,
    horizon: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<u64>>,
    count: u64,
    #[serde(serialize_with = "serialize_display")]
    delta: Exponent,
    /// `Σ n^-δ`, kept when the times themselves are not.
    #[serde(skip_serializing_if = "Option::is_none")]
    streamed_sum: Option<Enclosure>,
}

fn serialize_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl BalancedSet {
    pub fn from_times(alpha: String, x: Point, horizon: u64, times: Vec<u64>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self {
            alpha,
            x,
            horizon,
            count: times.len() as u64,
            times: Some(times),
            delta: Exponent::ONE,
            streamed_sum: None,
        }
    }

    pub fn alpha(&self) -> &str {
        &self.alpha
    }

    pub fn x(&self) -> &Point {
        &self.x
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `None` for count-only summaries.
    pub fn times(&self) -> Option<&[u64]> {
        self.times.as_deref()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn delta(&self) -> Exponent {
        self.delta
    }

    pub fn is_count_only(&self) -> bool {
        self.times.is_none()
    }

    /// The set cut back to horizon `n <= N`.
    pub fn truncated(&self, n: u64) -> Option<Self> {
        let times = self.times.as_ref()?;
        let end = times.partition_point(|&t| t <= n);
        Some(Self::from_times(
            self.alpha.clone(),
            self.x.clone(),
            n.min(self.horizon),
            times[..end].to_vec(),
        ))
    }

    /// Number of balanced times `<= n`.
    pub fn count_up_to(&self, n: u64) -> Option<u64> {
        let times = self.times.as_ref()?;
        Some(times.partition_point(|&t| t <= n) as u64)
    }

    /// One `n` per line under the header `n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let times = self
            .times
            .as_ref()
            .ok_or_else(|| io::Error::other("count-only set has no times to export"))?;
        writeln!(out, "n")?;
        for t in times {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

/// `V_{α,x}(N)` under the default budget; horizons above [`LIST_LIMIT`] are
/// streamed as a count with the `δ = 1` sum.
pub fn balanced_times(alpha: &CertifiedReal, x: &Point, n: u64) -> Result<BalancedSet, DynamicsError> {
    if n > LIST_LIMIT {
        balanced_count(alpha, x, n, Exponent::ONE, DEFAULT_BUDGET)
    } else {
        balanced_times_with_budget(alpha, x, n, DEFAULT_BUDGET)
    }
}

pub fn balanced_times_with_budget(
    alpha: &CertifiedReal,
    x: &Point,
    n: u64,
    budget: u64,
) -> Result<BalancedSet, DynamicsError> {
    check_budget(n, budget)?;
    let mut orbit = Orbit::new(alpha, x.clone())?;
    let mut times = Vec::new();
    for k in 1..=n {
        if orbit.advance()? == 0 {
            times.push(k);
        }
    }
    Ok(BalancedSet::from_times(alpha.source().to_string(), x.clone(), n, times))
}

/// Count-only summary carrying `Σ n^-δ`.
pub fn balanced_count(
    alpha: &CertifiedReal,
    x: &Point,
    n: u64,
    delta: Exponent,
    budget: u64,
) -> Result<BalancedSet, DynamicsError> {
    check_budget(n, budget)?;
    let mut orbit = Orbit::new(alpha, x.clone())?;
    let mut count = 0;
    let mut sum = Enclosure::zero();
    for k in 1..=n {
        if orbit.advance()? == 0 {
            count += 1;
            sum += &Enclosure::inv_pow(&BigUint::from(k), delta);
        }
    }
    Ok(BalancedSet {
        alpha: alpha.source().to_string(),
        x: x.clone(),
        horizon: n,
        times: None,
        count,
        delta,
        streamed_sum: Some(sum),
    })
}

/// `Σ_{n ∈ V} n^-δ` with outward rounding.
pub fn reciprocal_sum(set: &BalancedSet, delta: Exponent) -> Result<Enclosure, DynamicsError> {
    match (&set.times, &set.streamed_sum) {
        (Some(times), _) => Ok(times
            .iter()
            .map(|&n| Enclosure::inv_pow(&BigUint::from(n), delta))
            .sum()),
        (None, Some(sum)) if set.delta == delta => Ok(sum.clone()),
        _ => Err(DynamicsError::Domain(format!(
            "count-only set carries the sum for δ = {}, not {delta}",
            set.delta
        ))),
    }
}

/// Precomputed enclosures of `n^-δ` for `2 <= n <= max`, summed in 256-bit
/// fixed point. Used when many orbits share one exponent.
#[derive(Debug, Clone)]
pub struct ReciprocalTable {
    delta: Exponent,
    lo: Vec<u128>,
    hi: Vec<u128>,
}

impl ReciprocalTable {
    pub fn new(max: u64, delta: Exponent) -> Self {
        let (lo, hi): (Vec<u128>, Vec<u128>) = (0..=max)
            .into_par_iter()
            .map(|n| {
                if n < 2 {
                    return (0, 0);
                }
                let e = Enclosure::inv_pow(&BigUint::from(n), delta);
                let (lo, hi) = e.scaled();
                let lo = u128::try_from(lo).expect("n^-δ < 1");
                let hi = u128::try_from(hi).expect("n^-δ < 1");
                (lo, hi)
            })
            .unzip();
        Self { delta, lo, hi }
    }

    pub fn delta(&self) -> Exponent {
        self.delta
    }

    pub fn max(&self) -> u64 {
        self.lo.len() as u64 - 1
    }

    /// Running sum over the given increasing times.
    pub fn accumulator(&self) -> TableSum<'_> {
        TableSum {
            table: self,
            lo: (0, 0),
            hi: (0, 0),
            ones: 0,
        }
    }

    pub fn sum(&self, times: &[u64]) -> Enclosure {
        let mut acc = self.accumulator();
        for &t in times {
            acc.add(t);
        }
        acc.value()
    }
}

#[derive(Debug, Clone)]
pub struct TableSum<'a> {
    table: &'a ReciprocalTable,
    lo: (u64, u128),
    hi: (u64, u128),
    ones: u64,
}

impl TableSum<'_> {
    #[inline]
    pub fn add(&mut self, n: u64) {
        assert!(n >= 1 && n <= self.table.max(), "time {n} outside table");
        if n == 1 {
            self.ones += 1;
            return;
        }
        let i = n as usize;
        add_wide(&mut self.lo, self.table.lo[i]);
        add_wide(&mut self.hi, self.table.hi[i]);
    }

    pub fn value(&self) -> Enclosure {
        let wide = |(carry, low): (u64, u128)| (BigInt::from(carry + self.ones) << 128u32) + BigInt::from(low);
        Enclosure::from_scaled(wide(self.lo), wide(self.hi))
    }
}

#[inline]
fn add_wide(acc: &mut (u64, u128), v: u128) {
    let (sum, overflow) = acc.1.overflowing_add(v);
    acc.1 = sum;
    acc.0 += u64::from(overflow);
}

/// `#t_x(N)` for every level `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelOccupancy {
    horizon: u64,
    counts: BTreeMap<i64, u64>,
}

impl LevelOccupancy {
    pub fn from_levels(levels: &[i64]) -> Self {
        let mut counts = BTreeMap::new();
        for &l in levels {
            *counts.entry(l).or_insert(0) += 1;
        }
        Self {
            horizon: levels.len() as u64,
            counts,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn counts(&self) -> &BTreeMap<i64, u64> {
        &self.counts
    }

    pub fn get(&self, level: i64) -> u64 {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Lowest and highest occupied levels.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.counts.keys().next()?, *self.counts.keys().next_back()?))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "level,count")?;
        for (l, c) in &self.counts {
            writeln!(out, "{l},{c}")?;
        }
        Ok(())
    }
}

pub fn level_occupancy(alpha: &CertifiedReal, x: &Point, n: u64) -> Result<LevelOccupancy, DynamicsError> {
    level_occupancy_with_budget(alpha, x, n, DEFAULT_BUDGET)
}

pub fn level_occupancy_with_budget(
    alpha: &CertifiedReal,
    x: &Point,
    n: u64,
    budget: u64,
) -> Result<LevelOccupancy, DynamicsError> {
    check_budget(n, budget)?;
    let mut orbit = Orbit::new(alpha, x.clone())?;
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(orbit.advance()?).or_insert(0) += 1;
    }
    Ok(LevelOccupancy { horizon: n, counts })
}

/// The grid `x_j = j/G + 1/(2G)`.
pub fn grid_point(j: u64, g: u64) -> Point {
    Point::rational(BigRational::new((2 * j + 1).into(), (2 * g).into())).expect("midpoint in [0,1)")
}

/// Outcome of the return-frequency check on a grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnFrequency {
    pub n: usize,
    pub q_n: u64,
    pub a_sum: u64,
    pub grid: u64,
    /// Grid points with `#V(q_n)/q_n > 1/(4(6A_n + 1))`.
    pub passing: u64,
}

impl ReturnFrequency {
    pub fn fraction(&self) -> BigRational {
        BigRational::new(self.passing.into(), self.grid.into())
    }

    pub fn fraction_f64(&self) -> f64 {
        self.passing as f64 / self.grid as f64
    }
}

/// Fraction of the midpoint grid whose orbit is balanced at a rate above
/// `1/(4(6A_n+1))` by time `q_n`.
pub fn return_frequency_fraction(
    alpha: &CertifiedReal,
    n: usize,
    grid: u64,
    budget: u64,
) -> Result<ReturnFrequency, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Domain("n must be at least 1".into()));
    }
    if grid < 64 {
        return Err(DynamicsError::Domain(format!("grid size {grid} below 64")));
    }
    let mut alpha = alpha.clone();
    let q = crate::dynamics::q_steps(&mut alpha, n, budget)?;
    let a_sum = quotient_sums(alpha.source(), n)?[n - 1].a_sum.clone();
    let a_sum = u64::try_from(a_sum).map_err(|_| DynamicsError::Domain("A_n beyond 64 bits".into()))?;
    let threshold = 4 * (6 * u128::from(a_sum) + 1);
    let passing = (0..grid)
        .into_par_iter()
        .map(|j| {
            let set = balanced_times_with_budget(&alpha, &grid_point(j, grid), q, budget)?;
            Ok(u128::from(set.count()) * threshold > u128::from(q))
        })
        .collect::<Result<Vec<bool>, DynamicsError>>()?
        .into_iter()
        .filter(|&b| b)
        .count() as u64;
    Ok(ReturnFrequency {
        n,
        q_n: q,
        a_sum,
        grid,
        passing,
    })
}

/// `sums.csv`: one row per horizon.
pub fn write_sums_csv<W: Write>(mut out: W, rows: &[(u64, Enclosure)], delta: Exponent) -> io::Result<()> {
    writeln!(out, "N,lower,upper,delta")?;
    for (n, e) in rows {
        let (lo, hi) = e.to_decimal_bounds(30);
        writeln!(out, "{n},{lo},{hi},{delta}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
