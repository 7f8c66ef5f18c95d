//! Continued-fraction arithmetic: quotient sources, convergents, the Gauss
//! shift, partial-quotient sums and expansion of rationals.
//!
//! Every quantity here is an arbitrary-precision integer. The constructed
//! rotation numbers used by [`crate::renorm`] have superexponentially growing
//! quotients, so `q_n` leaves the range of any fixed-width type within a few
//! terms.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfError {
    #[error("requested depth {requested} unavailable: source yields only {available} quotients")]
    DepthUnavailable { requested: usize, available: usize },
    #[error("empty expansion")]
    EmptyExpansion,
    #[error("value {0} outside (0,1)")]
    Domain(String),
    #[error("invalid quotient source: {0}")]
    InvalidSource(String),
}

/// The concrete producer behind a [`PartialQuotientSource`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceKind {
    /// A finite expansion; the value it names is the exact rational.
    Explicit(Vec<BigUint>),
    /// Eventually periodic expansion `[pre..., period, period, ...]`.
    Periodic {
        preperiod: Vec<BigUint>,
        period: Vec<BigUint>,
    },
    /// The interleave `2a_1, b_1, 2a_2, b_2, ...`. Finite schedules describe a
    /// prefix of an irrational; cyclic ones repeat forever.
    Constructed {
        a: Vec<BigUint>,
        b: Vec<BigUint>,
        bound: BigUint,
        cyclic: bool,
    },
    /// Trusted prefix of the expansion of a uniformly drawn dyadic rational.
    Sampled {
        seed: u64,
        precision_bits: u32,
        trusted: Vec<BigUint>,
    },
}

/// A sequence `a_1, a_2, ...` of partial quotients.
///
/// Cloning is cheap; the underlying kind is shared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialQuotientSource {
    kind: Arc<SourceKind>,
    offset: usize,
}

fn check_positive(values: &[BigUint], what: &str) -> Result<(), CfError> {
    if values.iter().any(Zero::is_zero) {
        return Err(CfError::InvalidSource(format!("{what} must be positive integers")));
    }
    Ok(())
}

fn big_vec(values: &[u64]) -> Vec<BigUint> {
    values.iter().map(|&v| BigUint::from(v)).collect()
}

impl PartialQuotientSource {
    fn from_kind(kind: SourceKind) -> Self {
        Self {
            kind: Arc::new(kind),
            offset: 0,
        }
    }

    pub fn explicit(quotients: Vec<BigUint>) -> Result<Self, CfError> {
        check_positive(&quotients, "quotients")?;
        Ok(Self::from_kind(SourceKind::Explicit(quotients)))
    }

    pub fn explicit_u64(quotients: &[u64]) -> Result<Self, CfError> {
        Self::explicit(big_vec(quotients))
    }

    pub fn periodic(preperiod: Vec<BigUint>, period: Vec<BigUint>) -> Result<Self, CfError> {
        if period.is_empty() {
            return Err(CfError::InvalidSource("period must be non-empty".into()));
        }
        check_positive(&preperiod, "preperiod")?;
        check_positive(&period, "period")?;
        Ok(Self::from_kind(SourceKind::Periodic { preperiod, period }))
    }

    pub fn periodic_u64(preperiod: &[u64], period: &[u64]) -> Result<Self, CfError> {
        Self::periodic(big_vec(preperiod), big_vec(period))
    }

    /// Interleaves `2a_i` with `b_i`. A finite schedule yields
    /// `a.len() + b.len()` quotients, which requires `a.len() - b.len()` to be
    /// 0 or 1.
    pub fn constructed(
        a: Vec<BigUint>,
        b: Vec<BigUint>,
        bound: BigUint,
        cyclic: bool,
    ) -> Result<Self, CfError> {
        check_positive(&a, "a schedule")?;
        check_positive(&b, "b schedule")?;
        if let Some(bad) = b.iter().find(|&v| v > &bound) {
            return Err(CfError::InvalidSource(format!("b value {bad} exceeds bound {bound}")));
        }
        if cyclic {
            if a.is_empty() || b.is_empty() {
                return Err(CfError::InvalidSource("cyclic schedules must be non-empty".into()));
            }
        } else if a.len() != b.len() && a.len() != b.len() + 1 {
            return Err(CfError::InvalidSource(format!(
                "schedule lengths {} and {} do not interleave",
                a.len(),
                b.len()
            )));
        }
        Ok(Self::from_kind(SourceKind::Constructed { a, b, bound, cyclic }))
    }

    pub fn constructed_u64(a: &[u64], b: &[u64], bound: u64, cyclic: bool) -> Result<Self, CfError> {
        Self::constructed(big_vec(a), big_vec(b), BigUint::from(bound), cyclic)
    }

    /// Expands a uniform dyadic rational `u / 2^precision_bits` drawn from a
    /// ChaCha8 stream seeded by `seed`, keeping only quotients whose
    /// convergent denominator stays below `2^(precision_bits / 3)`.
    pub fn sampled(seed: u64, precision_bits: u32) -> Result<Self, CfError> {
        if precision_bits < 8 {
            return Err(CfError::InvalidSource("sampled precision must be at least 8 bits".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let numerator = random_numerator(&mut rng, precision_bits);
        let trusted = expand_dyadic_guarded(&numerator, precision_bits);
        Ok(Self::from_kind(SourceKind::Sampled {
            seed,
            precision_bits,
            trusted,
        }))
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// Number of quotients already dropped by [`gauss_map`].
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn kind_name(&self) -> &'static str {
        match &*self.kind {
            SourceKind::Explicit(_) => "explicit",
            SourceKind::Periodic { .. } => "periodic",
            SourceKind::Constructed { .. } => "constructed",
            SourceKind::Sampled { .. } => "sampled",
        }
    }

    /// Number of quotients available, `None` if the source is infinite.
    pub fn len(&self) -> Option<usize> {
        let raw = match &*self.kind {
            SourceKind::Explicit(q) => Some(q.len()),
            SourceKind::Periodic { .. } => None,
            SourceKind::Constructed { a, b, cyclic, .. } => {
                if *cyclic {
                    None
                } else {
                    Some(a.len() + b.len())
                }
            }
            SourceKind::Sampled { trusted, .. } => Some(trusted.len()),
        };
        raw.map(|n| n.saturating_sub(self.offset))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// True when the source names a rational exactly (finite explicit
    /// expansions). Finite constructed and sampled sources are prefixes of
    /// an unknown continuation.
    pub fn is_exact_rational(&self) -> bool {
        matches!(&*self.kind, SourceKind::Explicit(_))
    }

    /// The quotient `a_i`, 1-based.
    pub fn quotient(&self, index: usize) -> Result<BigUint, CfError> {
        assert!(index >= 1, "quotients are 1-based");
        let unavailable = || CfError::DepthUnavailable {
            requested: index,
            available: self.len().unwrap_or(usize::MAX),
        };
        let raw = index - 1 + self.offset;
        match &*self.kind {
            SourceKind::Explicit(q) => q.get(raw).cloned().ok_or_else(unavailable),
            SourceKind::Sampled { trusted, .. } => trusted.get(raw).cloned().ok_or_else(unavailable),
            SourceKind::Periodic { preperiod, period } => Ok(if raw < preperiod.len() {
                preperiod[raw].clone()
            } else {
                period[(raw - preperiod.len()) % period.len()].clone()
            }),
            SourceKind::Constructed { a, b, cyclic, .. } => {
                let pair = raw / 2;
                if raw % 2 == 0 {
                    let value = if *cyclic { a.get(pair % a.len()) } else { a.get(pair) };
                    value.map(|v| v << 1u32).ok_or_else(unavailable)
                } else {
                    let value = if *cyclic { b.get(pair % b.len()) } else { b.get(pair) };
                    value.cloned().ok_or_else(unavailable)
                }
            }
        }
    }

    /// The first `n` quotients.
    pub fn prefix(&self, n: usize) -> Result<Vec<BigUint>, CfError> {
        (1..=n).map(|i| self.quotient(i)).collect()
    }

    /// The exact rational named by a finite explicit source.
    pub fn exact_value(&self) -> Option<BigRational> {
        if !self.is_exact_rational() {
            return None;
        }
        let n = self.len()?;
        let last = convergents(self, n).ok()?.pop()?;
        Some(BigRational::new(last.p.into(), last.q.into()))
    }
}

impl fmt::Display for PartialQuotientSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[BigUint]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        match &*self.kind {
            SourceKind::Explicit(q) => write!(f, "explicit:{}", list(q))?,
            SourceKind::Periodic { preperiod, period } => {
                if preperiod.is_empty() {
                    write!(f, "periodic:{}", list(period))?
                } else {
                    write!(f, "periodic:{}|{}", list(preperiod), list(period))?
                }
            }
            SourceKind::Constructed { a, b, bound, cyclic } => write!(
                f,
                "constructed:a={};b={};m={}{}",
                list(a),
                list(b),
                bound,
                if *cyclic { "" } else { ";finite" }
            )?,
            SourceKind::Sampled {
                seed,
                precision_bits,
                ..
            } => write!(f, "sampled:{seed}:{precision_bits}")?,
        }
        if self.offset > 0 {
            write!(f, "@{}", self.offset)?;
        }
        Ok(())
    }
}

fn parse_list(text: &str) -> Result<Vec<BigUint>, CfError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<BigUint>()
                .map_err(|_| CfError::InvalidSource(format!("bad quotient {t:?}")))
        })
        .collect()
}

impl FromStr for PartialQuotientSource {
    type Err = CfError;

    /// Parses the textual descriptors used on the command line:
    /// `explicit:1,2,3`, `periodic:2`, `periodic:1,2|3`, `rational:5/12`,
    /// `constructed:a=1,2;b=1;m=1[;finite]` and `sampled:SEED:BITS`.
    /// A trailing `@k` applies the Gauss shift `k` times.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (body, shift) = match s.rsplit_once('@') {
            Some((body, k)) => (
                body,
                k.parse::<usize>()
                    .map_err(|_| CfError::InvalidSource(format!("bad shift in {s:?}")))?,
            ),
            None => (s, 0),
        };
        let (kind, rest) = body
            .split_once(':')
            .ok_or_else(|| CfError::InvalidSource(format!("missing kind in {s:?}")))?;
        let mut source = match kind {
            "explicit" => Self::explicit(parse_list(rest)?)?,
            "periodic" => match rest.split_once('|') {
                Some((pre, period)) => Self::periodic(parse_list(pre)?, parse_list(period)?)?,
                None => Self::periodic(Vec::new(), parse_list(rest)?)?,
            },
            "rational" => {
                let value = rest
                    .parse::<BigRational>()
                    .map_err(|_| CfError::InvalidSource(format!("bad rational {rest:?}")))?;
                expand_real(&value, usize::MAX)?
            }
            "constructed" => {
                let (mut a, mut b, mut m, mut cyclic) = (None, None, None, true);
                for field in rest.split(';') {
                    match field.split_once('=') {
                        Some(("a", v)) => a = Some(parse_list(v)?),
                        Some(("b", v)) => b = Some(parse_list(v)?),
                        Some(("m", v)) => {
                            m = Some(v.parse::<BigUint>().map_err(|_| {
                                CfError::InvalidSource(format!("bad bound {v:?}"))
                            })?)
                        }
                        None if field == "finite" => cyclic = false,
                        _ => return Err(CfError::InvalidSource(format!("bad field {field:?}"))),
                    }
                }
                let a = a.ok_or_else(|| CfError::InvalidSource("constructed needs a=".into()))?;
                let b = b.ok_or_else(|| CfError::InvalidSource("constructed needs b=".into()))?;
                let m = match m {
                    Some(m) => m,
                    None => b.iter().max().cloned().unwrap_or_else(BigUint::one),
                };
                Self::constructed(a, b, m, cyclic)?
            }
            "sampled" => {
                let (seed, bits) = rest
                    .split_once(':')
                    .ok_or_else(|| CfError::InvalidSource("sampled needs SEED:BITS".into()))?;
                let seed = seed
                    .parse()
                    .map_err(|_| CfError::InvalidSource(format!("bad seed {seed:?}")))?;
                let bits = bits
                    .parse()
                    .map_err(|_| CfError::InvalidSource(format!("bad bits {bits:?}")))?;
                Self::sampled(seed, bits)?
            }
            other => return Err(CfError::InvalidSource(format!("unknown kind {other:?}"))),
        };
        for _ in 0..shift {
            source = gauss_map(&source)?;
        }
        Ok(source)
    }
}

/// A convergent `p_n / q_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    pub n: usize,
    #[serde(with = "crate::decimal")]
    pub p: BigUint,
    #[serde(with = "crate::decimal")]
    pub q: BigUint,
}

impl Convergent {
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.p.clone().into(), self.q.clone().into())
    }
}

/// Streams convergents `0, 1, 2, ...` of a source.
#[derive(Debug, Clone)]
pub struct Convergents {
    source: PartialQuotientSource,
    prev: (BigUint, BigUint),
    current: Convergent,
    started: bool,
}

impl Convergents {
    pub fn new(source: &PartialQuotientSource) -> Self {
        Self {
            source: source.clone(),
            prev: (BigUint::one(), BigUint::zero()),
            current: Convergent {
                n: 0,
                p: BigUint::zero(),
                q: BigUint::one(),
            },
            started: false,
        }
    }
}

impl Iterator for Convergents {
    type Item = Result<Convergent, CfError>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return Some(Ok(self.current.clone()));
        }
        let n = self.current.n + 1;
        let a = match self.source.quotient(n) {
            Ok(a) => a,
            Err(e) => return Some(Err(e)),
        };
        let p = &a * &self.current.p + &self.prev.0;
        let q = &a * &self.current.q + &self.prev.1;
        let old = std::mem::replace(&mut self.current, Convergent { n, p, q });
        self.prev = (old.p, old.q);
        Some(Ok(self.current.clone()))
    }
}

/// Convergents `0..=n`.
pub fn convergents(source: &PartialQuotientSource, n: usize) -> Result<Vec<Convergent>, CfError> {
    Convergents::new(source).take(n + 1).collect()
}

/// The Gauss shift `[a_1, a_2, ...] -> [a_2, a_3, ...]`.
pub fn gauss_map(source: &PartialQuotientSource) -> Result<PartialQuotientSource, CfError> {
    if source.is_empty() {
        return Err(CfError::EmptyExpansion);
    }
    Ok(match &*source.kind {
        SourceKind::Explicit(q) => {
            PartialQuotientSource::from_kind(SourceKind::Explicit(q[source.offset + 1..].to_vec()))
        }
        SourceKind::Periodic { preperiod, period } => {
            let mut pre = preperiod.clone();
            let mut per = period.clone();
            for _ in 0..=source.offset {
                if pre.is_empty() {
                    per.rotate_left(1);
                } else {
                    pre.remove(0);
                }
            }
            PartialQuotientSource::from_kind(SourceKind::Periodic {
                preperiod: pre,
                period: per,
            })
        }
        _ => PartialQuotientSource {
            kind: source.kind.clone(),
            offset: source.offset + 1,
        },
    })
}

/// `A_n = a_1 + ... + a_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientStats {
    pub n: usize,
    #[serde(with = "crate::decimal")]
    pub a_sum: BigUint,
}

/// `A_1 ..= A_n`.
pub fn quotient_sums(source: &PartialQuotientSource, n: usize) -> Result<Vec<QuotientStats>, CfError> {
    let mut total = BigUint::zero();
    (1..=n)
        .map(|i| {
            total += source.quotient(i)?;
            Ok(QuotientStats {
                n: i,
                a_sum: total.clone(),
            })
        })
        .collect()
}

/// Continued-fraction expansion of a rational in `(0, 1)`, truncated at
/// `max_terms`. Untruncated expansions never end in 1.
pub fn expand_real(value: &BigRational, max_terms: usize) -> Result<PartialQuotientSource, CfError> {
    if !value.is_positive() || value >= &BigRational::one() {
        return Err(CfError::Domain(value.to_string()));
    }
    let mut num = value.numer().magnitude().clone();
    let mut den = value.denom().magnitude().clone();
    let mut quotients = Vec::new();
    while !num.is_zero() && quotients.len() < max_terms {
        let (a, r) = den.div_rem(&num);
        quotients.push(a);
        den = std::mem::replace(&mut num, r);
    }
    PartialQuotientSource::explicit(quotients)
}

fn random_numerator<R: Rng>(rng: &mut R, bits: u32) -> BigUint {
    let words = bits.div_ceil(32) as usize;
    loop {
        let digits: Vec<u32> = (0..words).map(|_| rng.gen()).collect();
        let mut u = BigUint::new(digits);
        let excess = words as u32 * 32 - bits;
        u >>= excess;
        if !u.is_zero() {
            return u;
        }
    }
}

/// Quotients of `numerator / 2^bits` while `q_n < 2^(bits/3)`.
fn expand_dyadic_guarded(numerator: &BigUint, bits: u32) -> Vec<BigUint> {
    let guard = u64::from(bits / 3);
    let mut num = numerator.clone();
    let mut den = BigUint::one() << bits;
    let (mut q_prev, mut q) = (BigUint::zero(), BigUint::one());
    let mut out = Vec::new();
    while !num.is_zero() {
        let (a, r) = den.div_rem(&num);
        let q_next = &a * &q + &q_prev;
        if q_next.bits() > guard {
            break;
        }
        out.push(a);
        q_prev = std::mem::replace(&mut q, q_next);
        den = std::mem::replace(&mut num, r);
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SourceRecord {
    Explicit {
        #[serde(with = "crate::decimal::vec")]
        quotients: Vec<BigUint>,
    },
    Periodic {
        #[serde(with = "crate::decimal::vec")]
        preperiod: Vec<BigUint>,
        #[serde(with = "crate::decimal::vec", rename = "quotients")]
        period: Vec<BigUint>,
    },
    Constructed {
        #[serde(with = "crate::decimal::vec")]
        a: Vec<BigUint>,
        #[serde(with = "crate::decimal::vec")]
        b: Vec<BigUint>,
        #[serde(with = "crate::decimal", rename = "M")]
        bound: BigUint,
        cyclic: bool,
    },
    Sampled {
        seed: u64,
        precision_bits: u32,
        #[serde(with = "crate::decimal::vec")]
        quotients: Vec<BigUint>,
    },
}

#[derive(Serialize, Deserialize)]
struct SourceJson {
    #[serde(flatten)]
    record: SourceRecord,
    #[serde(default, skip_serializing_if = "is_zero")]
    offset: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl Serialize for PartialQuotientSource {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let record = match &*self.kind {
            SourceKind::Explicit(q) => SourceRecord::Explicit { quotients: q.clone() },
            SourceKind::Periodic { preperiod, period } => SourceRecord::Periodic {
                preperiod: preperiod.clone(),
                period: period.clone(),
            },
            SourceKind::Constructed { a, b, bound, cyclic } => SourceRecord::Constructed {
                a: a.clone(),
                b: b.clone(),
                bound: bound.clone(),
                cyclic: *cyclic,
            },
            SourceKind::Sampled {
                seed,
                precision_bits,
                trusted,
            } => SourceRecord::Sampled {
                seed: *seed,
                precision_bits: *precision_bits,
                quotients: trusted.clone(),
            },
        };
        SourceJson {
            record,
            offset: self.offset,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PartialQuotientSource {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let json = SourceJson::deserialize(deserializer)?;
        let source = match json.record {
            SourceRecord::Explicit { quotients } => Self::explicit(quotients),
            SourceRecord::Periodic { preperiod, period } => Self::periodic(preperiod, period),
            SourceRecord::Constructed { a, b, bound, cyclic } => Self::constructed(a, b, bound, cyclic),
            SourceRecord::Sampled {
                seed,
                precision_bits,
                quotients,
            } => check_positive(&quotients, "quotients").map(|_| {
                Self::from_kind(SourceKind::Sampled {
                    seed,
                    precision_bits,
                    trusted: quotients,
                })
            }),
        }
        .map_err(D::Error::custom)?;
        Ok(PartialQuotientSource {
            offset: json.offset,
            ..source
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn qs(convs: &[Convergent]) -> Vec<u64> {
        convs.iter().map(|c| u64::try_from(&c.q).unwrap()).collect()
    }

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn silver_ratio_denominators() {
        let src = PartialQuotientSource::periodic_u64(&[], &[2]).unwrap();
        assert_eq!(qs(&convergents(&src, 3).unwrap()), vec![1, 2, 5, 12]);
    }

    #[test]
    fn fibonacci_denominators() {
        let src = PartialQuotientSource::periodic_u64(&[], &[1]).unwrap();
        assert_eq!(qs(&convergents(&src, 5).unwrap()), vec![1, 1, 2, 3, 5, 8]);
    }

    #[test]
    fn first_convergent_is_reciprocal() {
        let src = PartialQuotientSource::explicit_u64(&[7]).unwrap();
        let c = convergents(&src, 1).unwrap();
        assert_eq!(c[0].to_rational(), rat(0, 1));
        assert_eq!(c[1].to_rational(), rat(1, 7));
    }

    #[test]
    fn explicit_exhaustion_is_reported() {
        let src = PartialQuotientSource::explicit_u64(&[1, 2]).unwrap();
        assert_eq!(
            convergents(&src, 3).unwrap_err(),
            CfError::DepthUnavailable {
                requested: 3,
                available: 2
            }
        );
    }

    #[test]
    fn gauss_map_examples() {
        let src = PartialQuotientSource::explicit_u64(&[2, 3, 4]).unwrap();
        assert_eq!(gauss_map(&src).unwrap(), PartialQuotientSource::explicit_u64(&[3, 4]).unwrap());
        let golden = PartialQuotientSource::periodic_u64(&[], &[1]).unwrap();
        assert_eq!(gauss_map(&golden).unwrap(), golden);
        let five = PartialQuotientSource::explicit_u64(&[5]).unwrap();
        assert!(gauss_map(&five).unwrap().is_empty());
        assert_eq!(
            gauss_map(&gauss_map(&five).unwrap()).unwrap_err(),
            CfError::EmptyExpansion
        );
    }

    #[test]
    fn gauss_map_on_constructed_shifts() {
        let src = PartialQuotientSource::constructed_u64(&[1, 3], &[2, 1], 2, true).unwrap();
        let shifted = gauss_map(&src).unwrap();
        assert_eq!(
            shifted.prefix(4).unwrap(),
            src.prefix(5).unwrap()[1..].to_vec()
        );
        let pre = PartialQuotientSource::periodic_u64(&[4, 5], &[1, 2]).unwrap();
        let mut s = pre.clone();
        for _ in 0..3 {
            s = gauss_map(&s).unwrap();
        }
        assert_eq!(s.prefix(4).unwrap(), pre.prefix(7).unwrap()[3..].to_vec());
    }

    #[test]
    fn quotient_sum_examples() {
        let src = PartialQuotientSource::explicit_u64(&[1, 2, 3]).unwrap();
        let sums: Vec<_> = quotient_sums(&src, 3).unwrap().into_iter().map(|s| s.a_sum).collect();
        assert_eq!(sums, big_vec(&[1, 3, 6]));
        let ones = PartialQuotientSource::periodic_u64(&[], &[1]).unwrap();
        assert_eq!(quotient_sums(&ones, 10).unwrap()[9].a_sum, BigUint::from(10u32));
        let cons = PartialQuotientSource::constructed_u64(&[1], &[1], 1, true).unwrap();
        assert_eq!(cons.prefix(4).unwrap(), big_vec(&[2, 1, 2, 1]));
        let sums: Vec<_> = quotient_sums(&cons, 4).unwrap().into_iter().map(|s| s.a_sum).collect();
        assert_eq!(sums, big_vec(&[2, 3, 5, 6]));
        assert!(quotient_sums(&src, 0).unwrap().is_empty());
    }

    #[test]
    fn expand_real_examples() {
        let e = |p, q| expand_real(&rat(p, q), 100).unwrap().prefix_all();
        assert_eq!(e(5, 12), big_vec(&[2, 2, 2]));
        assert_eq!(e(1, 2), big_vec(&[2]));
        assert_eq!(e(2, 3), big_vec(&[1, 2]));
        assert!(matches!(expand_real(&rat(3, 2), 5), Err(CfError::Domain(_))));
        assert!(matches!(expand_real(&rat(0, 1), 5), Err(CfError::Domain(_))));
        assert_eq!(expand_real(&rat(5, 12), 2).unwrap().prefix_all(), big_vec(&[2, 2]));
    }

    #[test]
    fn constructed_schedule_checks() {
        assert!(PartialQuotientSource::constructed_u64(&[1], &[3], 2, true).is_err());
        assert!(PartialQuotientSource::constructed_u64(&[1, 1, 1], &[1], 2, false).is_err());
        let finite = PartialQuotientSource::constructed_u64(&[1, 2], &[1], 1, false).unwrap();
        assert_eq!(finite.len(), Some(3));
        assert_eq!(finite.prefix(3).unwrap(), big_vec(&[2, 1, 4]));
        assert!(finite.quotient(4).is_err());
    }

    #[test]
    fn sampled_sources_are_deterministic_and_guarded() {
        let a = PartialQuotientSource::sampled(11, 512).unwrap();
        let b = PartialQuotientSource::sampled(11, 512).unwrap();
        assert_eq!(a, b);
        let n = a.len().unwrap();
        assert!(n > 40, "only {n} trusted quotients");
        let last = convergents(&a, n).unwrap().pop().unwrap();
        assert!(last.q.bits() <= 512 / 3);
        assert_ne!(a, PartialQuotientSource::sampled(12, 512).unwrap());
    }

    #[test]
    fn parse_and_display() {
        for text in [
            "explicit:1,2,3",
            "periodic:2",
            "periodic:1,2|3",
            "constructed:a=1,2;b=1;m=1",
            "constructed:a=1,2;b=1;m=2;finite",
            "sampled:3:256",
            "periodic:2@1",
        ] {
            let src: PartialQuotientSource = text.parse().unwrap();
            let again: PartialQuotientSource = src.to_string().parse().unwrap();
            assert_eq!(src.prefix(3).unwrap(), again.prefix(3).unwrap(), "{text}");
        }
        let r: PartialQuotientSource = "rational:5/12".parse().unwrap();
        assert_eq!(r.prefix_all(), big_vec(&[2, 2, 2]));
        assert!("bogus:1".parse::<PartialQuotientSource>().is_err());
    }

    #[test]
    fn json_shapes() {
        let src = PartialQuotientSource::explicit_u64(&[1, 2]).unwrap();
        assert_eq!(
            serde_json::to_string(&src).unwrap(),
            r#"{"kind":"explicit","quotients":["1","2"]}"#
        );
        let c = Convergent {
            n: 2,
            p: BigUint::from(2u32),
            q: BigUint::from(5u32),
        };
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"n":2,"p":"2","q":"5"}"#);
        let cons = PartialQuotientSource::constructed_u64(&[1, 2], &[1], 1, false).unwrap();
        let back: PartialQuotientSource =
            serde_json::from_str(&serde_json::to_string(&cons).unwrap()).unwrap();
        assert_eq!(back, cons);
        let shifted = gauss_map(&PartialQuotientSource::sampled(5, 128).unwrap()).unwrap();
        let back: PartialQuotientSource =
            serde_json::from_str(&serde_json::to_string(&shifted).unwrap()).unwrap();
        assert_eq!(back, shifted);
    }

    impl PartialQuotientSource {
        fn prefix_all(&self) -> Vec<BigUint> {
            self.prefix(self.len().unwrap()).unwrap()
        }
    }

    fn random_source() -> impl Strategy<Value = PartialQuotientSource> {
        prop::collection::vec(1u64..=10, 1..=20)
            .prop_filter("1 is outside (0,1)", |q| q != &[1])
            .prop_map(|q| PartialQuotientSource::explicit_u64(&q).unwrap())
    }

    proptest! {
        #[test]
        fn consecutive_convergents_are_unimodular(q in prop::collection::vec(1u64..1000, 1..200)) {
            let src = PartialQuotientSource::explicit_u64(&q).unwrap();
            let c = convergents(&src, q.len()).unwrap();
            for w in c.windows(2) {
                let det = BigInt::from(w[1].p.clone()) * BigInt::from(w[0].q.clone())
                    - BigInt::from(w[0].p.clone()) * BigInt::from(w[1].q.clone());
                prop_assert_eq!(det.magnitude(), &BigUint::one());
            }
        }

        #[test]
        fn convergents_alternate(q in prop::collection::vec(1u64..50, 3..60)) {
            let src = PartialQuotientSource::explicit_u64(&q).unwrap();
            let c: Vec<_> = convergents(&src, q.len()).unwrap().iter().map(Convergent::to_rational).collect();
            for w in c.windows(3) {
                let (lo, hi) = if w[0] < w[1] { (&w[0], &w[1]) } else { (&w[1], &w[0]) };
                prop_assert!(lo < &w[2] && &w[2] <= hi);
            }
        }

        #[test]
        fn expansion_round_trip(src in random_source()) {
            let n = src.len().unwrap();
            let value = convergents(&src, n).unwrap()[n].to_rational();
            let back = expand_real(&value, n).unwrap().prefix_all();
            let mut expected = src.prefix_all();
            if expected.len() > 1 && expected.last() == Some(&BigUint::one()) {
                expected.pop();
                *expected.last_mut().unwrap() += 1u32;
            }
            prop_assert_eq!(back, expected);
        }

        #[test]
        fn gauss_map_shortens(src in random_source(), k in 0usize..20) {
            let n = src.len().unwrap();
            let k = k.min(n);
            let mut s = src.clone();
            for _ in 0..k { s = gauss_map(&s).unwrap(); }
            prop_assert_eq!(s.len(), Some(n - k));
            prop_assert_eq!(s.prefix_all(), src.prefix_all()[k..].to_vec());
        }
    }
}
