use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RenormError;
use crate::cf::PartialQuotientSource;
use crate::enclosure::{Enclosure, Exponent};

/// A summable target sequence `c_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CSequence {
    /// `c_n = ratio^n`.
    Geometric { ratio: BigRational },
}

impl CSequence {
    pub fn geometric(ratio: BigRational) -> Result<Self, RenormError> {
        if !ratio.is_positive() || ratio >= BigRational::one() {
            return Err(RenormError::InvalidSchedule(format!("ratio {ratio} outside (0,1)")));
        }
        Ok(Self::Geometric { ratio })
    }

    pub fn term(&self, n: usize) -> BigRational {
        match self {
            Self::Geometric { ratio } => ratio.pow(n as i32),
        }
    }

    /// `Σ_{k > n} c_k`.
    pub fn tail_after(&self, n: usize) -> BigRational {
        match self {
            Self::Geometric { ratio } => ratio.pow(n as i32 + 1) / (BigRational::one() - ratio),
        }
    }
}

impl fmt::Display for CSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric { ratio } => write!(f, "geometric:{ratio}"),
        }
    }
}

impl FromStr for CSequence {
    type Err = RenormError;

    /// `geometric:1/2` or `geometric:0.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RenormError::InvalidSchedule(format!("bad c sequence {s:?}"));
        let ratio = s.strip_prefix("geometric:").ok_or_else(bad)?;
        let ratio = match ratio.parse::<BigRational>() {
            Ok(r) => r,
            Err(_) => ratio
                .parse::<f64>()
                .ok()
                .and_then(BigRational::from_float)
                .ok_or_else(bad)?,
        };
        Self::geometric(ratio)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum CRecord {
    Geometric { ratio: f64 },
}

impl Serialize for CSequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Geometric { ratio } => CRecord::Geometric {
                ratio: ratio.to_f64().unwrap_or(f64::NAN),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match CRecord::deserialize(d)? {
            CRecord::Geometric { ratio } => {
                let ratio = BigRational::from_float(ratio)
                    .ok_or_else(|| serde::de::Error::custom("ratio is not finite"))?;
                Self::geometric(ratio).map_err(serde::de::Error::custom)
            }
        }
    }
}

/// How the `a_i` are chosen against `c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthRule {
    /// `log(2M A_n) / A_n < c_n`.
    Log,
    /// `q_{2n}^{1-δ} / A_n^δ < c_n`.
    Delta(Exponent),
}

impl fmt::Display for GrowthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Log => write!(f, "log"),
            Self::Delta(e) => write!(f, "delta:{e}"),
        }
    }
}

impl FromStr for GrowthRule {
    type Err = RenormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "log" {
            return Ok(Self::Log);
        }
        let e = s
            .strip_prefix("delta:")
            .ok_or_else(|| RenormError::InvalidSchedule(format!("bad growth rule {s:?}")))?;
        let e: Exponent = e.parse().map_err(|err| RenormError::ExponentOutOfRange(format!("{err}")))?;
        Ok(Self::Delta(e))
    }
}

/// The schedule of `α = [2a_1, b_1, 2a_2, b_2, ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakSchedule {
    a: Vec<BigUint>,
    b: Vec<u64>,
    m: u64,
    r: Option<u32>,
    c: Option<CSequence>,
    rule: Option<GrowthRule>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRecord {
    #[serde(with = "crate::decimal::vec")]
    a: Vec<BigUint>,
    b: Vec<u64>,
    #[serde(rename = "M")]
    m: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<CSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
}

impl Serialize for PeakSchedule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ScheduleRecord {
            a: self.a.clone(),
            b: self.b.clone(),
            m: self.m,
            r: self.r,
            c: self.c.clone(),
            rule: self.rule.map(|r| r.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PeakSchedule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = ScheduleRecord::deserialize(d)?;
        let rule = rec
            .rule
            .map(|r| r.parse::<GrowthRule>())
            .transpose()
            .map_err(serde::de::Error::custom)?;
        let schedule = PeakSchedule::new(rec.a, rec.b, rec.m).map_err(serde::de::Error::custom)?;
        schedule.with_growth(rec.c, rule, rec.r).map_err(serde::de::Error::custom)
    }
}

impl PeakSchedule {
    pub fn new(a: Vec<BigUint>, b: Vec<u64>, m: u64) -> Result<Self, RenormError> {
        let invalid = |msg: String| Err(RenormError::InvalidSchedule(msg));
        if m == 0 {
            return invalid("M must be at least 1".into());
        }
        if a.len() != b.len() {
            return invalid(format!("{} values of a but {} of b", a.len(), b.len()));
        }
        if let Some(i) = a.iter().position(Zero::is_zero) {
            return invalid(format!("a_{} = 0", i + 1));
        }
        if let Some(i) = b.iter().position(|&v| v == 0 || v > m) {
            return invalid(format!("b_{} = {} outside [1, {m}]", i + 1, b[i]));
        }
        Ok(Self {
            a,
            b,
            m,
            r: None,
            c: None,
            rule: None,
        })
    }

    pub fn from_u64(a: &[u64], b: &[u64], m: u64) -> Result<Self, RenormError> {
        Self::new(a.iter().map(|&v| BigUint::from(v)).collect(), b.to_vec(), m)
    }

    /// Attaches the growth data and checks every stated condition exactly.
    pub fn with_growth(
        mut self,
        c: Option<CSequence>,
        rule: Option<GrowthRule>,
        r: Option<u32>,
    ) -> Result<Self, RenormError> {
        if rule.is_some() && c.is_none() {
            return Err(RenormError::InvalidSchedule("a growth rule needs a c sequence".into()));
        }
        if r == Some(0) {
            return Err(RenormError::InvalidSchedule("r must be at least 1".into()));
        }
        self.c = c;
        self.rule = rule;
        self.r = r;
        self.check_growth()?;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    /// `a_i`, 1-based.
    pub fn a(&self, i: usize) -> &BigUint {
        &self.a[i - 1]
    }

    /// `b_i`, 1-based.
    pub fn b(&self, i: usize) -> u64 {
        self.b[i - 1]
    }

    pub fn a_values(&self) -> &[BigUint] {
        &self.a
    }

    pub fn b_values(&self) -> &[u64] {
        &self.b
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn r(&self) -> Option<u32> {
        self.r
    }

    pub fn c(&self) -> Option<&CSequence> {
        self.c.as_ref()
    }

    pub fn rule(&self) -> Option<GrowthRule> {
        self.rule
    }

    /// The first `n` pairs.
    pub fn prefix(&self, n: usize) -> Result<Self, RenormError> {
        self.require(n)?;
        Ok(Self {
            a: self.a[..n].to_vec(),
            b: self.b[..n].to_vec(),
            ..self.clone()
        })
    }

    pub(crate) fn require(&self, n: usize) -> Result<(), RenormError> {
        if n > self.depth() {
            return Err(RenormError::DepthUnavailable {
                requested: n,
                available: self.depth(),
            });
        }
        Ok(())
    }

    /// `A_0, ..., A_depth`.
    pub fn a_sums(&self) -> Vec<BigUint> {
        let mut sums = vec![BigUint::zero()];
        for a in &self.a {
            let next = sums.last().expect("non-empty") + a;
            sums.push(next);
        }
        sums
    }

    /// `q_{-1} = 0, q_0, q_1, ..., q_{2·depth}`, shifted so that index `i`
    /// holds `q_{i-1}`.
    fn denominators_from_minus_one(&self) -> Vec<BigUint> {
        let mut q = vec![BigUint::zero(), BigUint::one()];
        for (a, &b) in self.a.iter().zip(&self.b) {
            let n = q.len();
            let odd = (a << 1u32) * &q[n - 1] + &q[n - 2];
            let even = &odd * b + &q[n - 1];
            q.push(odd);
            q.push(even);
        }
        q
    }

    /// `q_0, q_1, ..., q_{2·depth}`.
    pub fn denominators(&self) -> Vec<BigUint> {
        self.denominators_from_minus_one().split_off(1)
    }

    /// `q_{2n}` for `n = 0..=depth`.
    pub fn even_denominators(&self) -> Vec<BigUint> {
        self.denominators().into_iter().step_by(2).collect()
    }

    /// The finite constructed quotient stream `2a_1, b_1, 2a_2, ...`.
    pub fn to_source(&self) -> Result<PartialQuotientSource, RenormError> {
        Ok(PartialQuotientSource::constructed(
            self.a.clone(),
            self.b.iter().map(|&v| BigUint::from(v)).collect(),
            BigUint::from(self.m),
            false,
        )?)
    }

    fn check_growth(&self) -> Result<(), RenormError> {
        let sums = self.a_sums();
        if let Some(r) = self.r {
            for i in 1..self.depth() {
                if !r_condition(self.a(i + 1), &sums[i], r) {
                    return Err(RenormError::Infeasible {
                        depth: i + 1,
                        reason: format!("a_{} + 1 >= A_{i}^{r}", i + 1),
                    });
                }
            }
        }
        let (Some(c), Some(rule)) = (&self.c, self.rule) else {
            return Ok(());
        };
        let q = self.even_denominators();
        for n in 1..=self.depth() {
            let ok = match rule {
                GrowthRule::Log => log_condition(&sums[n], self.m, &c.term(n)),
                GrowthRule::Delta(delta) => delta_condition(&q[n], &sums[n], delta, &c.term(n)),
            };
            if !ok {
                return Err(RenormError::InvalidSchedule(format!("{rule} condition fails at n = {n}")));
            }
        }
        Ok(())
    }
}

fn r_condition(a_next: &BigUint, a_sum: &BigUint, r: u32) -> bool {
    a_next + 1u32 < a_sum.pow(r)
}

/// Certifies `ln(2M·A) < c·A`; an undecided comparison counts as failure.
pub(crate) fn log_condition(a_sum: &BigUint, m: u64, c: &BigRational) -> bool {
    if a_sum.is_zero() {
        return false;
    }
    let ln = Enclosure::ln(&(a_sum * 2u32 * m));
    ln.certainly_below(&(c * BigRational::from(BigInt::from(a_sum.clone()))))
}

/// `q^{1-δ} / A^δ < c` as `q^{d-p} · D < N · A^p` with `δ = p/d` and
/// `c^d = N/D`.
pub(crate) fn delta_condition(q: &BigUint, a_sum: &BigUint, delta: Exponent, c: &BigRational) -> bool {
    let (p, d) = (delta.num(), delta.den());
    let cd = c.pow(d as i32);
    let (num, den) = (cd.numer().magnitude(), cd.denom().magnitude());
    q.pow(d - p) * den < num * a_sum.pow(p)
}

/// Builds a schedule of `depth` pairs with `b_i = M` and each `a_i` the least
/// value meeting the growth rule at depth `i`.
///
/// For the log rule `ln(2MA)/A` decreases in `A`, so the least admissible
/// `A_n >= A_{n-1} + 1` is found by bisection. For the δ rule the ratio
/// `q_{2n}^{1-δ}/A_n^δ` as a function of `a_n` rises to a single maximum and
/// then falls; the chosen `a_n` is the least value from which the inequality
/// holds for every larger choice.
pub fn generate_schedule(
    c: &CSequence,
    m: u64,
    r: Option<u32>,
    rule: GrowthRule,
    depth: usize,
) -> Result<PeakSchedule, RenormError> {
    if m == 0 {
        return Err(RenormError::InvalidSchedule("M must be at least 1".into()));
    }
    let mut a: Vec<BigUint> = Vec::with_capacity(depth);
    let mut a_sum = BigUint::zero();
    // q_{2n-3}, q_{2n-2}
    let (mut q_odd, mut q_even) = (BigUint::zero(), BigUint::one());
    for n in 1..=depth {
        let c_n = c.term(n);
        let next = match rule {
            GrowthRule::Log => least_log_a(&a_sum, m, &c_n),
            GrowthRule::Delta(delta) => least_delta_a(&a_sum, &q_odd, &q_even, m, delta, &c_n),
        };
        if let Some(r) = r {
            if n >= 2 && !r_condition(&next, &a_sum, r) {
                return Err(RenormError::Infeasible {
                    depth: n,
                    reason: format!("least admissible a_{n} = {next} violates a_{n} + 1 < A_{}^{r}", n - 1),
                });
            }
        }
        a_sum += &next;
        let odd = (&next << 1u32) * &q_even + &q_odd;
        let even = &odd * m + &q_even;
        q_odd = odd;
        q_even = even;
        a.push(next);
    }
    PeakSchedule::new(a, vec![m; depth], m)?.with_growth(Some(c.clone()), Some(rule), r)
}

fn least_log_a(prev: &BigUint, m: u64, c: &BigRational) -> BigUint {
    let ok = |a: &BigUint| log_condition(&(prev + a), m, c);
    let one = BigUint::one();
    if ok(&one) {
        return one;
    }
    // ln(2Mx)/x is decreasing once 2Mx >= e, which holds from A = 2 on.
    first_true(BigUint::from(2u32), ok)
}

/// Least `x >= lo` with `pred(x)`, for a predicate that stays true once true.
fn first_true(lo: BigUint, pred: impl Fn(&BigUint) -> bool) -> BigUint {
    if pred(&lo) {
        return lo;
    }
    let mut bad = lo;
    let mut step = BigUint::one();
    let mut good = &bad + &step;
    while !pred(&good) {
        bad = good;
        step <<= 1u32;
        good = &bad + &step;
    }
    while &good - &bad > BigUint::one() {
        let mid = (&bad + &good) >> 1u32;
        if pred(&mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

fn least_delta_a(
    prev: &BigUint,
    q_odd: &BigUint,
    q_even: &BigUint,
    m: u64,
    delta: Exponent,
    c: &BigRational,
) -> BigUint {
    // q_{2n}(a) = slope·a + offset
    let slope = q_even * (2 * m);
    let offset = q_odd * m + q_even;
    let q_of = |a: &BigUint| &slope * a + &offset;
    let ok = |a: &BigUint| delta_condition(&q_of(a), &(prev + a), delta, c);
    let (p, e) = (delta.num(), delta.den() - delta.num());
    // Stationary point of the ratio: e·slope·(A + a) = p·(slope·a + offset).
    let num = BigInt::from(&slope * prev * e) - BigInt::from(&offset * p);
    let den = BigInt::from(&slope * (p - e));
    let start = if num.is_positive() {
        let floor = num.div_floor(&den).to_biguint().expect("positive");
        let ceil = num.div_ceil(&den).to_biguint().expect("positive");
        if ceil.is_zero() {
            BigUint::one()
        } else if ok(&ceil) && (floor.is_zero() || ok(&floor)) {
            // The maximum of the ratio already satisfies the bound.
            return BigUint::one();
        } else {
            ceil.max(BigUint::one())
        }
    } else {
        BigUint::one()
    };
    first_true(start, ok)
}
