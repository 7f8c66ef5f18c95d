use std::io::{self, Write};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::{PeakSchedule, RenormError};
use crate::dynamics::{CertifiedReal, Orbit, Point};

/// Largest number of levels held in memory by default.
pub const DEFAULT_LEVEL_BUDGET: u64 = 1 << 20;

/// Visits to each level `0..=A_n` by the orbit of `(α, 0)` with `x = α`
/// during the times `k = 0, ..., q_{2n} - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeakHistogram {
    depth: usize,
    #[serde(with = "crate::decimal")]
    block_length: BigUint,
    #[serde(with = "crate::decimal::vec")]
    counts: Vec<BigUint>,
}

impl PeakHistogram {
    pub fn from_counts(depth: usize, counts: Vec<BigUint>) -> Self {
        let block_length = counts.iter().sum();
        Self {
            depth,
            block_length,
            counts,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `q_{2n}`.
    pub fn block_length(&self) -> &BigUint {
        &self.block_length
    }

    /// `H_n(t)` for `t = 0..=A_n`.
    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    pub fn count(&self, level: i64) -> BigUint {
        usize::try_from(level)
            .ok()
            .and_then(|t| self.counts.get(t).cloned())
            .unwrap_or_default()
    }

    /// Number of levels with at least one visit.
    pub fn support_size(&self) -> usize {
        self.counts.iter().filter(|c| !c.is_zero()).count()
    }

    pub fn top_level(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn max_count(&self) -> &BigUint {
        self.counts.iter().max().expect("non-empty histogram")
    }

    /// `level,count` with counts as decimal strings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "level,count")?;
        for (t, c) in self.counts.iter().enumerate() {
            writeln!(out, "{t},{c}")?;
        }
        Ok(())
    }
}

/// The pair `(H_n, G_n)`: `G_n` is the ascending part of the block, the
/// piece that is copied `b_n` times.
#[derive(Debug, Clone)]
struct PeakState {
    h: Vec<BigUint>,
    g: Vec<BigUint>,
}

impl PeakState {
    fn initial() -> Self {
        Self {
            h: vec![BigUint::one()],
            g: vec![BigUint::zero()],
        }
    }

    /// One renormalization step. The `q_{2n+2}` block is the word
    /// `(P^a Q p^a)^b P` where `P` is the `q_{2n}` peak, `p` is `P` with its
    /// last step reversed (same visits) and `Q` is the previous ascending
    /// piece. Copy `j` of `P` sits `j` levels up, copy `j` of `p` sits `a - j`
    /// levels up, and `Q` sits at height `a`.
    fn step(&self, a: usize, b: &BigUint) -> Self {
        let top = self.h.len() - 1;
        let new_top = top + a;
        let mut prefix = Vec::with_capacity(top + 2);
        prefix.push(BigUint::zero());
        for c in &self.h {
            let next = prefix.last().expect("non-empty") + c;
            prefix.push(next);
        }
        // Σ_{j=0}^{a-1} H(t - j)
        let window = |t: usize| -> BigUint {
            let hi = (t + 1).min(top + 1);
            let lo = (t + 1).saturating_sub(a);
            if lo >= hi {
                BigUint::zero()
            } else {
                &prefix[hi] - &prefix[lo]
            }
        };
        let mut g = Vec::with_capacity(new_top + 1);
        for t in 0..=new_top {
            let mut v = BigUint::zero();
            if t < new_top {
                v += window(t);
            }
            if t >= 1 {
                v += window(t - 1);
            }
            if t >= a && t - a < self.g.len() {
                v += &self.g[t - a];
            }
            g.push(v);
        }
        let h = g
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let mut c = v * b;
                if let Some(old) = self.h.get(t) {
                    c += old;
                }
                c
            })
            .collect();
        Self { h, g }
    }

    fn max_h(&self) -> BigUint {
        self.h.iter().max().cloned().unwrap_or_default()
    }

    fn max_g(&self) -> BigUint {
        self.g.iter().max().cloned().unwrap_or_default()
    }
}

fn level_count(schedule: &PeakSchedule, n: usize) -> BigUint {
    schedule.a_sums()[n].clone() + 1u32
}

/// Runs the recursion through depth `n`, returning every intermediate state.
fn states(schedule: &PeakSchedule, n: usize, budget: u64) -> Result<Vec<PeakState>, RenormError> {
    schedule.require(n)?;
    let levels = level_count(schedule, n);
    if levels > BigUint::from(budget) {
        return Err(RenormError::LevelBudget {
            levels: levels.to_string(),
            budget,
        });
    }
    let mut out = vec![PeakState::initial()];
    for i in 1..=n {
        let a = schedule.a(i).to_usize().expect("within level budget");
        let next = out.last().expect("non-empty").step(a, &BigUint::from(schedule.b(i)));
        out.push(next);
    }
    Ok(out)
}

/// `H_n` by the stack-and-shift recursion, in `O(A_n)` operations per depth.
pub fn peak_histogram(schedule: &PeakSchedule, n: usize) -> Result<PeakHistogram, RenormError> {
    peak_histogram_with_budget(schedule, n, DEFAULT_LEVEL_BUDGET)
}

pub fn peak_histogram_with_budget(
    schedule: &PeakSchedule,
    n: usize,
    budget: u64,
) -> Result<PeakHistogram, RenormError> {
    let state = states(schedule, n, budget)?.pop().expect("non-empty");
    Ok(PeakHistogram::from_counts(n, state.h))
}

/// `H_0, ..., H_n`.
pub fn peak_histograms(schedule: &PeakSchedule, n: usize, budget: u64) -> Result<Vec<PeakHistogram>, RenormError> {
    Ok(states(schedule, n, budget)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| PeakHistogram::from_counts(i, s.h))
        .collect())
}

/// The same histogram read off a brute-force orbit of `(α, 0)`. The schedule
/// is repeated cyclically past its end so that `α` is irrational.
pub fn brute_force_histogram(schedule: &PeakSchedule, n: usize, budget: u64) -> Result<PeakHistogram, RenormError> {
    schedule.require(n)?;
    let q = &schedule.even_denominators()[n];
    let steps = q
        .to_u64()
        .filter(|&s| s <= budget)
        .ok_or_else(|| RenormError::Dynamics(crate::dynamics::DynamicsError::BudgetExceeded {
            requested: q.to_string(),
            budget,
        }))?;
    let source = crate::cf::PartialQuotientSource::constructed(
        schedule.a_values().to_vec(),
        schedule.b_values().iter().map(|&v| BigUint::from(v)).collect(),
        BigUint::from(schedule.m()),
        true,
    )?;
    let alpha = CertifiedReal::new(&source)?;
    let mut orbit = Orbit::new(&alpha, Point::alpha_multiple_of(1))?;
    let mut counts: Vec<u64> = Vec::new();
    let mut level = 0i64;
    for k in 0..steps {
        let t = usize::try_from(level).map_err(|_| RenormError::Oracle(format!("level {level} below 0 at k = {k}")))?;
        if counts.len() <= t {
            counts.resize(t + 1, 0);
        }
        counts[t] += 1;
        level = orbit.advance()?;
    }
    Ok(PeakHistogram::from_counts(n, counts.into_iter().map(BigUint::from).collect()))
}

/// Lowest and highest level of `H_n`, from the recursion on supports alone.
/// This runs at any depth: `supp G_{n+1} = [0, A_n + a - 1] ∪ [1, A_n + a] ∪
/// (a + supp G_n)` and `supp H_{n+1} = supp G_{n+1} ∪ supp H_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportProfile {
    pub lo: BigUint,
    pub hi: BigUint,
    /// False if some level between `lo` and `hi` could be unvisited.
    pub contiguous: bool,
}

impl SupportProfile {
    pub fn size(&self) -> BigUint {
        &self.hi - &self.lo + 1u32
    }
}

pub fn peak_support(schedule: &PeakSchedule, n: usize) -> Result<SupportProfile, RenormError> {
    schedule.require(n)?;
    // supp H = [0, top]; supp G ⊆ [0, g_top], empty at depth 0.
    let mut top = BigUint::zero();
    let mut g_top: Option<BigUint> = None;
    let mut contiguous = true;
    for i in 1..=n {
        let a = schedule.a(i);
        let new_top = &top + a;
        // The window sums of a gap-free [0, top] cover [0, top + a - 1] and
        // [1, top + a]; the shifted G must land inside that range.
        if let Some(g) = &g_top {
            contiguous &= g + a <= new_top;
        }
        g_top = Some(new_top.clone());
        top = new_top;
    }
    Ok(SupportProfile {
        lo: BigUint::zero(),
        hi: top,
        contiguous,
    })
}

/// `max_t H_n(t)` and `max_t H_n(t) · max(A_n, 1) / q_{2n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaxHits {
    pub depth: usize,
    #[serde(with = "crate::decimal")]
    pub max: BigUint,
    #[serde(with = "crate::decimal")]
    pub a_sum: BigUint,
    #[serde(with = "crate::decimal")]
    pub block_length: BigUint,
    /// False when `max` is the envelope bound rather than the exact maximum.
    pub exact: bool,
}

impl MaxHits {
    pub fn ratio(&self) -> BigRational {
        let a = self.a_sum.clone().max(BigUint::one());
        BigRational::new((&self.max * a).into(), self.block_length.clone().into())
    }
}

/// Upper bounds `U_n >= max_t H_n(t)` for `n = 0..=depth`, exact through the
/// last depth within `budget` levels and continued by
///
/// `UG_{n+1} = 2·min(q_{2n}, a·U_n) + UG_n`, `U_{n+1} = b·UG_{n+1} + U_n`,
///
/// which bounds each window sum of `a` consecutive levels both by the mass
/// `q_{2n}` and by `a` times the maximum.
pub fn hit_envelope(schedule: &PeakSchedule, depth: usize, budget: u64) -> Result<Vec<(BigUint, bool)>, RenormError> {
    schedule.require(depth)?;
    let sums = schedule.a_sums();
    let exact_depth = (0..=depth)
        .take_while(|&n| sums[n].clone() + 1u32 <= BigUint::from(budget))
        .last()
        .unwrap_or(0);
    let exact = states(schedule, exact_depth, budget)?;
    let mut out: Vec<(BigUint, bool)> = exact.iter().map(|s| (s.max_h(), true)).collect();
    let last = exact.last().expect("non-empty");
    let (mut u, mut ug) = (last.max_h(), last.max_g());
    let q = schedule.even_denominators();
    for n in exact_depth..depth {
        let a = schedule.a(n + 1);
        let window = (a * &u).min(q[n].clone());
        ug = window * 2u32 + &ug;
        u = &ug * schedule.b(n + 1) + &u;
        out.push((u.clone(), false));
    }
    Ok(out)
}

/// [`MaxHits`] at depth `n`, exact when `A_n + 1` levels fit in the default
/// budget and the envelope bound otherwise.
pub fn max_hits(schedule: &PeakSchedule, n: usize) -> Result<MaxHits, RenormError> {
    let (max, exact) = hit_envelope(schedule, n, DEFAULT_LEVEL_BUDGET)?.pop().expect("non-empty");
    Ok(MaxHits {
        depth: n,
        max,
        a_sum: schedule.a_sums()[n].clone(),
        block_length: schedule.even_denominators()[n].clone(),
        exact,
    })
}

/// A bound on the zero-level hits in any `q_{2n}` consecutive times of any
/// orbit: such a window overlaps at most two peaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowBound {
    #[serde(with = "crate::decimal")]
    pub bound: BigUint,
    pub exact: bool,
}

pub fn zero_hit_window_bound(schedule: &PeakSchedule, n: usize) -> Result<WindowBound, RenormError> {
    let hits = max_hits(schedule, n)?;
    Ok(WindowBound {
        bound: hits.max * 2u32,
        exact: hits.exact,
    })
}
