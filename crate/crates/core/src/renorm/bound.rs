use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use super::histogram::{hit_envelope, DEFAULT_LEVEL_BUDGET};
use super::{PeakSchedule, RenormError};
use crate::enclosure::{Enclosure, Exponent};

/// Partial sums `Σ_{i<=N} i^-δ` are summed term by term up to this `N`.
pub const EXACT_SUM_LIMIT: u64 = 1 << 16;

/// How many `q_{2k}`-windows of the block `(q_{2k}, q_{2k+2}]` are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// All `(a_{k+1} + 1)·2M` windows.
    Default,
    /// Only `min((a_{k+1} + 1)·2M, 2M·A_k + 3)` windows, the ones nearest
    /// the start, since at most that many windows meet the zero level.
    Tight,
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Default => "default",
            Self::Tight => "tight",
        })
    }
}

impl FromStr for BoundMode {
    type Err = RenormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Self::Default),
            "tight" => Ok(Self::Tight),
            other => Err(RenormError::InvalidSchedule(format!("unknown bound mode {other:?}"))),
        }
    }
}

/// The bound for the times `(q_{2k}, q_{2k+2}]`:
/// `W_k · q_{2k}^-δ · Σ_{i=1}^{N_k} i^-δ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockBound {
    pub k: usize,
    #[serde(with = "crate::decimal")]
    pub windows: BigUint,
    #[serde(with = "crate::decimal")]
    pub window_bound: BigUint,
    pub exact_window: bool,
    pub value: Enclosure,
}

/// Extrapolation of the block bounds past `K` against the targets `c_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailCertificate {
    /// Depths used to fit `κ`.
    pub from: usize,
    pub to: usize,
    /// `max block_k / c_k` over the fitted depths.
    pub kappa: BigRational,
    /// `κ · Σ_{k>K} c_k`.
    pub tail: BigRational,
}

impl Serialize for TailCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TailCertificate", 4)?;
        st.serialize_field("from", &self.from)?;
        st.serialize_field("to", &self.to)?;
        st.serialize_field("kappa", &self.kappa.to_f64())?;
        st.serialize_field("tail", &self.tail.to_f64())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceBound {
    pub depth: usize,
    #[serde(serialize_with = "display")]
    pub delta: Exponent,
    pub mode: BoundMode,
    pub blocks: Vec<BlockBound>,
    pub total: Enclosure,
    pub tail: Option<TailCertificate>,
}

fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl ConvergenceBound {
    /// `Σ_{k<=K'} block_k` for `K' = 0..=K`.
    pub fn partial_sums(&self) -> Vec<Enclosure> {
        let mut acc = Enclosure::zero();
        self.blocks
            .iter()
            .map(|b| {
                acc += &b.value;
                acc.clone()
            })
            .collect()
    }

    /// The upper end of the bound.
    pub fn upper(&self) -> BigRational {
        self.total.upper()
    }

    /// True when the extrapolated tail is at most `eps`.
    pub fn is_cauchy_within(&self, eps: &BigRational) -> bool {
        self.tail.as_ref().is_some_and(|t| &t.tail <= eps)
    }

    /// `k,windows,window_bound,lower,upper` per block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,windows,window_bound,exact_window,lower,upper")?;
        for b in &self.blocks {
            let (lo, hi) = b.value.to_decimal_bounds(30);
            writeln!(out, "{},{},{},{},{lo},{hi}", b.k, b.windows, b.window_bound, b.exact_window)?;
        }
        Ok(())
    }
}

/// Enclosures of `Σ_{i<=N} i^-δ` for `N <= EXACT_SUM_LIMIT`, and an upper
/// bound `1 + ∫_1^N x^-δ dx` beyond.
struct PowerSums {
    delta: Exponent,
    prefix: Vec<Enclosure>,
}

impl PowerSums {
    fn new(delta: Exponent, max: u64) -> Self {
        let mut prefix = vec![Enclosure::zero()];
        let mut acc = Enclosure::zero();
        for i in 1..=max.min(EXACT_SUM_LIMIT) {
            acc += &Enclosure::inv_pow(&BigUint::from(i), delta);
            prefix.push(acc.clone());
        }
        Self { delta, prefix }
    }

    fn upto(&self, n: &BigUint) -> Enclosure {
        if let Some(i) = n.to_usize().filter(|&i| i < self.prefix.len()) {
            return self.prefix[i].clone();
        }
        let one = Enclosure::from_u64(1);
        if self.delta.is_one() {
            return one + Enclosure::ln(n);
        }
        let (p, d) = (self.delta.num(), self.delta.den());
        let rest = Exponent::new(d - p, d).expect("0 < 1 - δ < 1");
        let integral = Enclosure::pow(n, rest)
            .mul_integer(&BigUint::from(d))
            .div_integer(&BigUint::from(d - p));
        one + integral
    }
}

/// `W · q^-δ · sum`, with `W · q^-δ = (W^d / q^p)^(1/d)` evaluated `e` bits
/// above the working precision so that tiny scales keep their relative
/// accuracy against a huge `sum`.
fn scaled_product(w: &BigUint, q: &BigUint, delta: Exponent, sum: &Enclosure) -> Enclosure {
    let (p, d) = (delta.num(), delta.den());
    let (num, den) = (w.pow(d), q.pow(p));
    let e = den.bits().saturating_sub(num.bits()) / u64::from(d) + 2;
    let e = u32::try_from(e).expect("shift fits in u32");
    let scale = Enclosure::ratio_pow(&(num << (e * d)), &den, 1, d);
    scale.mul(sum).div_integer(&(BigUint::one() << e))
}

pub fn convergence_bound(
    schedule: &PeakSchedule,
    depth: usize,
    delta: Exponent,
    mode: BoundMode,
) -> Result<ConvergenceBound, RenormError> {
    convergence_bound_with_budget(schedule, depth, delta, mode, DEFAULT_LEVEL_BUDGET)
}

/// Bounds `sup_x Σ_{n ∈ V_{α,x}, n <= q_{2K+2}} n^-δ` by `Σ_{k=0}^{K} block_k`.
///
/// Each time in `(q_{2k}, q_{2k+2}]` lies in one of the windows
/// `(i·q_{2k}, (i+1)·q_{2k}]`, `i = 1..=N_k`; a window holds at most `W_k`
/// zero-level hits and each contributes at most `(i·q_{2k})^-δ`. The schedule
/// must reach depth `K + 1`.
pub fn convergence_bound_with_budget(
    schedule: &PeakSchedule,
    depth: usize,
    delta: Exponent,
    mode: BoundMode,
    budget: u64,
) -> Result<ConvergenceBound, RenormError> {
    if 2 * delta.num() <= delta.den() {
        return Err(RenormError::ExponentOutOfRange(delta.to_string()));
    }
    schedule.require(depth + 1)?;
    let envelope = hit_envelope(schedule, depth, budget)?;
    let q = schedule.even_denominators();
    let sums = schedule.a_sums();
    let two_m = BigUint::from(2 * schedule.m());
    let windows: Vec<BigUint> = (0..=depth)
        .map(|k| {
            let all = (schedule.a(k + 1) + 1u32) * &two_m;
            match mode {
                BoundMode::Default => all,
                BoundMode::Tight => all.min(&two_m * &sums[k] + 3u32),
            }
        })
        .collect();
    let power_sums = PowerSums::new(delta, windows.iter().max().and_then(|w| w.to_u64()).unwrap_or(EXACT_SUM_LIMIT));
    let blocks: Vec<BlockBound> = (0..=depth)
        .map(|k| {
            let (max, exact) = &envelope[k];
            let w = max * 2u32;
            BlockBound {
                k,
                value: scaled_product(&w, &q[k], delta, &power_sums.upto(&windows[k])),
                windows: windows[k].clone(),
                window_bound: w,
                exact_window: *exact,
            }
        })
        .collect();
    let total = blocks.iter().map(|b| b.value.clone()).sum();
    let tail = schedule.c().map(|c| {
        let from = (depth / 2).max(1);
        let to = depth.max(from);
        let kappa = (from..=to)
            .filter(|&k| k < blocks.len())
            .map(|k| blocks[k].value.upper() / c.term(k))
            .max()
            .unwrap_or_else(BigRational::one);
        TailCertificate {
            from,
            to,
            tail: &kappa * c.tail_after(depth),
            kappa,
        }
    });
    Ok(ConvergenceBound {
        depth,
        delta,
        mode,
        blocks,
        total,
        tail,
    })
}
