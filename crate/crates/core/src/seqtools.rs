//! Upper densities, sums of a sequence over a set of integers, and the
//! sparse counterexample set with positive upper density but convergent sum.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cf::{quotient_sums, CfError, PartialQuotientSource};
use crate::enclosure::{Enclosure, Exponent};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeqError {
    #[error("blocks must be sorted, disjoint and non-empty: {0}")]
    InvalidBlocks(String),
    #[error("rule {rule} not admissible: {reason}")]
    RuleNotAdmissible { rule: String, reason: String },
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Cf(#[from] CfError),
}

/// A positive decreasing sequence `b_n`, `n >= 1`, with exact rational values.
/// `L(n) = ⌊log₂(n + 1)⌋` keeps the logarithmic rules rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BRule {
    /// `1/n`
    Reciprocal,
    /// `1/(n·L(n))`
    ReciprocalLog,
    /// `1/(n·L(n))²`
    ReciprocalLogSquared,
    /// `1/A_n(α)`, with the partial quotient sums tabulated up to `len`.
    InverseQuotientSum { source: PartialQuotientSource, sums: Vec<BigUint> },
}

fn floor_log2(n: u64) -> u64 {
    u64::from(63 - (n + 1).leading_zeros())
}

impl BRule {
    /// `1/A_n` for the first `n` partial quotients of `source`.
    pub fn inverse_quotient_sum(source: PartialQuotientSource, n: usize) -> Result<Self, SeqError> {
        let sums = quotient_sums(&source, n)?.into_iter().map(|s| s.a_sum).collect();
        Ok(Self::InverseQuotientSum { source, sums })
    }

    pub fn name(&self) -> String {
        match self {
            Self::Reciprocal => "reciprocal".into(),
            Self::ReciprocalLog => "reciprocal-log".into(),
            Self::ReciprocalLogSquared => "reciprocal-log-squared".into(),
            Self::InverseQuotientSum { source, .. } => format!("inverse-a-sum:{source}"),
        }
    }

    /// Largest `n` the rule can be evaluated at.
    pub fn horizon(&self) -> u64 {
        match self {
            Self::InverseQuotientSum { sums, .. } => sums.len() as u64,
            _ => u64::MAX / 2,
        }
    }

    /// `(numerator, denominator)` of `b_n`.
    fn parts(&self, n: u64) -> Result<(BigUint, BigUint), SeqError> {
        if n == 0 {
            return Err(SeqError::Domain("b_n is defined for n >= 1".into()));
        }
        let one = BigUint::one();
        Ok(match self {
            Self::Reciprocal => (one, n.into()),
            Self::ReciprocalLog => (one, BigUint::from(n) * floor_log2(n)),
            Self::ReciprocalLogSquared => (one, (BigUint::from(n) * floor_log2(n)).pow(2)),
            Self::InverseQuotientSum { sums, .. } => {
                let a = sums.get(n as usize - 1).ok_or_else(|| {
                    SeqError::Domain(format!("A_{n} beyond the {} tabulated sums", sums.len()))
                })?;
                (one, a.clone())
            }
        })
    }

    pub fn value(&self, n: u64) -> Result<BigRational, SeqError> {
        let (p, q) = self.parts(n)?;
        Ok(BigRational::new(p.into(), q.into()))
    }

    /// `b_n^δ` enclosed.
    pub fn enclosure(&self, n: u64, delta: Exponent) -> Result<Enclosure, SeqError> {
        let (p, q) = self.parts(n)?;
        Ok(Enclosure::ratio_pow(&p, &q, delta.num(), delta.den()))
    }

    /// `n·b_n`.
    pub fn scaled(&self, n: u64) -> Result<BigRational, SeqError> {
        Ok(self.value(n)? * BigRational::from(BigInt::from(n)))
    }
}

impl fmt::Display for BRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for BRule {
    type Err = SeqError;

    /// The named rules; `inverse-a-sum:<source>[#N]` tabulates `N` sums
    /// (default 10⁴).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reciprocal" => Ok(Self::Reciprocal),
            "reciprocal-log" => Ok(Self::ReciprocalLog),
            "reciprocal-log-squared" => Ok(Self::ReciprocalLogSquared),
            _ => {
                let rest = s
                    .strip_prefix("inverse-a-sum:")
                    .ok_or_else(|| SeqError::UnknownRule(s.to_string()))?;
                let (source, n) = match rest.rsplit_once('#') {
                    Some((src, n)) => (src, n.parse().map_err(|_| SeqError::UnknownRule(s.to_string()))?),
                    None => (rest, 10_000),
                };
                Self::inverse_quotient_sum(source.parse()?, n)
            }
        }
    }
}

impl Serialize for BRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::InverseQuotientSum { sums, .. } => s.collect_str(&format_args!("{}#{}", self.name(), sums.len())),
            _ => s.collect_str(self),
        }
    }
}

impl<'de> Deserialize<'de> for BRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of positive integers as sorted, disjoint runs `[start, start + len)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockSet {
    blocks: Vec<(u64, u64)>,
}

impl BlockSet {
    pub fn new(blocks: Vec<(u64, u64)>) -> Result<Self, SeqError> {
        let mut prev_end = 1;
        for &(start, len) in &blocks {
            if len == 0 || start < prev_end {
                return Err(SeqError::InvalidBlocks(format!("[{start}, {len}]")));
            }
            prev_end = start
                .checked_add(len)
                .ok_or_else(|| SeqError::InvalidBlocks(format!("[{start}, {len}] overflows")))?;
        }
        Ok(Self { blocks })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `{lo, ..., hi}`.
    pub fn range(lo: u64, hi: u64) -> Result<Self, SeqError> {
        Self::new(vec![(lo, hi - lo + 1)])
    }

    /// Even numbers up to `n`.
    pub fn evens(n: u64) -> Self {
        Self {
            blocks: (1..=n / 2).map(|k| (2 * k, 1)).collect(),
        }
    }

    /// Merges adjacent runs.
    pub fn from_sorted(values: impl IntoIterator<Item = u64>) -> Result<Self, SeqError> {
        let mut blocks: Vec<(u64, u64)> = Vec::new();
        for v in values {
            match blocks.last_mut() {
                Some((s, l)) if *s + *l == v => *l += 1,
                _ => blocks.push((v, 1)),
            }
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[(u64, u64)] {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        let i = self.blocks.partition_point(|&(s, _)| s <= n);
        i > 0 && {
            let (s, l) = self.blocks[i - 1];
            n < s + l
        }
    }

    /// `#(S ∩ [1, n])`.
    pub fn count_up_to(&self, n: u64) -> u64 {
        self.blocks
            .iter()
            .take_while(|&&(s, _)| s <= n)
            .map(|&(s, l)| l.min(n - s + 1))
            .sum()
    }

    /// Elements `<= n` in increasing order.
    pub fn iter_up_to(&self, n: u64) -> impl Iterator<Item = u64> + '_ {
        self.blocks
            .iter()
            .take_while(move |&&(s, _)| s <= n)
            .flat_map(move |&(s, l)| s..(s + l).min(n + 1))
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.blocks
            .iter()
            .all(|&(s, l)| other.count_up_to(s + l - 1) - other.count_up_to(s - 1) == l)
    }
}

impl Serialize for BlockSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[String; 2]> = self
            .blocks
            .iter()
            .map(|&(a, l)| [a.to_string(), l.to_string()])
            .collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[String; 2]>::deserialize(d)?;
        let blocks = pairs
            .iter()
            .map(|[a, l]| Ok((a.parse()?, l.parse()?)))
            .collect::<Result<Vec<_>, std::num::ParseIntError>>()
            .map_err(serde::de::Error::custom)?;
        BlockSet::new(blocks).map_err(serde::de::Error::custom)
    }
}

/// `max_{n <= N} #(S ∩ [1, n]) / n` and a maximizing `n`; `0` for an empty
/// intersection. The ratio rises inside a run and falls in a gap, so only
/// run ends need checking.
pub fn upper_density(set: &BlockSet, n: u64) -> (BigRational, u64) {
    let mut best = (BigRational::zero(), 0);
    let mut count = 0;
    for &(s, l) in set.blocks() {
        if s > n {
            break;
        }
        let end = (s + l - 1).min(n);
        count += end - s + 1;
        let ratio = BigRational::new(count.into(), end.into());
        if ratio > best.0 {
            best = (ratio, end);
        }
    }
    best
}

/// `Σ_{n ∈ S, n <= N} b_n` exactly.
pub fn subset_sum_exact(rule: &BRule, set: &BlockSet, n: u64) -> Result<BigRational, SeqError> {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    // Accumulate as one fraction and reduce once.
    for k in set.iter_up_to(n) {
        let (p, q) = rule.parts(k)?;
        let (p, q) = (BigInt::from(p), BigInt::from(q));
        num = num * &q + p * &den;
        den *= q;
        if den.bits() > 1 << 16 {
            let r = BigRational::new(num, den);
            (num, den) = (r.numer().clone(), r.denom().clone());
        }
    }
    Ok(BigRational::new(num, den))
}

/// `Σ_{n ∈ S, n <= N} b_n^δ` enclosed.
pub fn subset_sum(rule: &BRule, set: &BlockSet, n: u64, delta: Exponent) -> Result<Enclosure, SeqError> {
    let mut acc = Enclosure::zero();
    for k in set.iter_up_to(n) {
        acc += &rule.enclosure(k, delta)?;
    }
    Ok(acc)
}

/// `min_{n <= N} n·b_n` and where it occurs.
pub fn liminf_proxy(rule: &BRule, n: u64) -> Result<(BigRational, u64), SeqError> {
    if n == 0 {
        return Err(SeqError::Domain("horizon must be at least 1".into()));
    }
    let mut best = (rule.scaled(1)?, 1);
    for k in 2..=n {
        let v = rule.scaled(k)?;
        if v < best.0 {
            best = (v, k);
        }
    }
    Ok(best)
}

/// The finite form of the divergence argument: with dyadic checkpoints
/// `2^j <= N` where every stretch `(2^{j-1}, 2^j]` meets `S` in at least an
/// `ε` fraction, `Σ_{n ∈ S, n <= N} b_n >= (ε/2)·J·m/2` for `J` checkpoints
/// and `m = min_j 2^j·b_{2^j}`. Returns `None` if a stretch is too sparse.
pub fn divergence_lower_bound(
    rule: &BRule,
    set: &BlockSet,
    n: u64,
    epsilon: &BigRational,
) -> Result<Option<BigRational>, SeqError> {
    let mut checkpoints = 0u64;
    let mut min_scaled: Option<BigRational> = None;
    let mut j = 1;
    while j < 64 && (1u64 << j) <= n {
        let (lo, hi) = (1u64 << (j - 1), 1u64 << j);
        let count = set.count_up_to(hi) - set.count_up_to(lo);
        if BigRational::new(count.into(), (hi - lo).into()) < *epsilon {
            return Ok(None);
        }
        let scaled = rule.scaled(hi)?;
        min_scaled = Some(match min_scaled {
            Some(m) if m <= scaled => m,
            _ => scaled,
        });
        checkpoints += 1;
        j += 1;
    }
    let Some(m) = min_scaled else { return Ok(None) };
    let two = BigRational::from(BigInt::from(2));
    Ok(Some(epsilon / &two * BigRational::from(BigInt::from(checkpoints)) * m / two))
}

/// The counterexample set `S = ∪_k {n_k, ..., n_k + ⌊ε n_k⌋}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseSetSpec {
    pub rule: BRule,
    #[serde(with = "rational_string")]
    pub epsilon: BigRational,
    pub markers: Vec<u64>,
    pub blocks: BlockSet,
}

mod rational_string {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl SparseSetSpec {
    /// Last element of the realized set.
    pub fn horizon(&self) -> u64 {
        self.blocks.blocks().last().map_or(0, |&(s, l)| s + l - 1)
    }

    /// `Σ_k (⌊ε n_k⌋ + 1)·b_{n_k}`, an exact upper bound for the sum over
    /// `S` since `b` decreases.
    pub fn chain_bound(&self) -> Result<BigRational, SeqError> {
        let mut total = BigRational::zero();
        for &(s, l) in self.blocks.blocks() {
            total += self.rule.value(s)? * BigRational::from(BigInt::from(l));
        }
        Ok(total)
    }
}

/// Steps allowed when searching for one marker.
pub const MARKER_SEARCH_BUDGET: u64 = 10_000_000;

/// Builds `markers` markers: `n_k` is the least integer with
/// `n_k > 2^{k-1}·n_{k-1}` and `n_k·b_{n_k} < 2^{-k}`.
pub fn build_counterexample(rule: &BRule, epsilon: &BigRational, markers: usize) -> Result<SparseSetSpec, SeqError> {
    if epsilon <= &BigRational::zero() || epsilon >= &BigRational::one() {
        return Err(SeqError::Domain(format!("ε = {epsilon} outside (0,1)")));
    }
    let not_admissible = |reason: String| SeqError::RuleNotAdmissible {
        rule: rule.name(),
        reason,
    };
    let mut ns: Vec<u64> = Vec::with_capacity(markers);
    let mut blocks = Vec::with_capacity(markers);
    for k in 1..=markers {
        let start = match ns.last() {
            None => 1,
            Some(&prev) => prev
                .checked_mul(1u64 << (k - 1).min(63))
                .and_then(|v| v.checked_add(1))
                .filter(|_| k <= 63)
                .ok_or_else(|| not_admissible(format!("n_{k} overflows 64 bits")))?,
        };
        let target = BigRational::new(BigInt::one(), BigInt::one() << k);
        let mut n = start;
        loop {
            if n - start >= MARKER_SEARCH_BUDGET || n > rule.horizon() {
                return Err(not_admissible(format!(
                    "no n in [{start}, {n}) with n·b_n < 2^-{k}"
                )));
            }
            if rule.scaled(n)? < target {
                break;
            }
            n += 1;
        }
        let width = (epsilon * BigRational::from(BigInt::from(n))).floor();
        let width: u64 = width.to_integer().try_into().expect("⌊εn⌋ < n");
        ns.push(n);
        blocks.push((n, width + 1));
    }
    Ok(SparseSetSpec {
        rule: rule.clone(),
        epsilon: epsilon.clone(),
        markers: ns,
        blocks: BlockSet::new(blocks)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn density_examples() {
        assert_eq!(upper_density(&BlockSet::evens(100), 100).0, r(1, 2));
        let (d, at) = upper_density(&BlockSet::range(1, 10).unwrap(), 100);
        assert_eq!((d, at), (r(1, 1), 10));
        assert_eq!(upper_density(&BlockSet::empty(), 100).0, r(0, 1));
    }

    #[test]
    fn sum_examples() {
        let all = BlockSet::range(1, 10).unwrap();
        assert_eq!(subset_sum_exact(&BRule::Reciprocal, &all, 10).unwrap(), r(7381, 2520));
        let e = subset_sum(&BRule::Reciprocal, &all, 10, Exponent::ONE).unwrap();
        assert!(e.contains(&r(7381, 2520)));
        let evens = subset_sum(&BRule::Reciprocal, &BlockSet::evens(100), 100, Exponent::ONE).unwrap();
        let exact = subset_sum_exact(&BRule::Reciprocal, &BlockSet::evens(100), 100).unwrap();
        assert!(evens.contains(&exact));
        assert!((evens.midpoint_f64() - 2.2496).abs() < 1e-4);
        assert_eq!(subset_sum_exact(&BRule::Reciprocal, &BlockSet::empty(), 100).unwrap(), r(0, 1));
    }

    #[test]
    fn rules_are_decreasing_and_parse() {
        for rule in [BRule::Reciprocal, BRule::ReciprocalLog, BRule::ReciprocalLogSquared] {
            for n in 1..2000 {
                assert!(rule.value(n + 1).unwrap() < rule.value(n).unwrap());
            }
            assert_eq!(rule.name().parse::<BRule>().unwrap(), rule);
        }
        assert_eq!(BRule::ReciprocalLog.value(3).unwrap(), r(1, 6));
        let a: BRule = "inverse-a-sum:periodic:1#50".parse().unwrap();
        assert_eq!(a.value(10).unwrap(), r(1, 10));
        assert!(a.value(51).is_err());
        assert!("harmonic".parse::<BRule>().is_err());
    }

    #[test]
    fn liminf_examples() {
        for n in [1, 10, 1000] {
            assert_eq!(liminf_proxy(&BRule::Reciprocal, n).unwrap().0, r(1, 1));
        }
        let vals: Vec<BigRational> = [100u64, 10_000, 1_000_000]
            .iter()
            .map(|&n| liminf_proxy(&BRule::ReciprocalLog, n).unwrap().0)
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        assert_eq!(vals[2], r(1, 19));
    }

    #[test]
    fn counterexample_markers() {
        let quarter = r(1, 4);
        let spec = build_counterexample(&BRule::ReciprocalLogSquared, &quarter, 6).unwrap();
        assert_eq!(spec.markers, vec![3, 7, 29, 233, 3729, 119_329]);
        for (k, w) in spec.markers.windows(2).enumerate() {
            assert!(w[1] > (1 << (k + 1)) * w[0]);
        }
        for (k, &n) in spec.markers.iter().enumerate() {
            assert!(BRule::ReciprocalLogSquared.scaled(n).unwrap() < r(1, 1 << (k + 1)));
        }
        let early = subset_sum_exact(&spec.rule, &spec.blocks, 300).unwrap();
        let full = subset_sum(&spec.rule, &spec.blocks, spec.horizon(), Exponent::ONE).unwrap();
        assert!(full.lower() > early);
        assert!(full.upper() <= spec.chain_bound().unwrap());
        assert!(spec.chain_bound().unwrap() < quarter);
        let (d, _) = upper_density(&spec.blocks, spec.horizon());
        assert!(d >= r(1, 8));
        assert!(matches!(
            build_counterexample(&BRule::Reciprocal, &quarter, 2),
            Err(SeqError::RuleNotAdmissible { .. })
        ));
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["blocks"][0], serde_json::json!(["3", "1"]));
        assert_eq!(json["epsilon"], "1/4");
        assert_eq!(serde_json::from_value::<SparseSetSpec>(json).unwrap(), spec);
    }

    #[test]
    fn divergence_direction() {
        let evens = BlockSet::evens(1_000_000);
        let half = r(1, 2);
        let bound = divergence_lower_bound(&BRule::Reciprocal, &evens, 1_000_000, &half)
            .unwrap()
            .unwrap();
        assert_eq!(bound, r(19, 8));
        let sum = subset_sum(&BRule::Reciprocal, &evens, 1_000_000, Exponent::ONE).unwrap();
        assert!(sum.lower() > bound);
        let sparse = BlockSet::new(vec![(5, 1)]).unwrap();
        assert_eq!(divergence_lower_bound(&BRule::Reciprocal, &sparse, 100, &half).unwrap(), None);
    }

    #[test]
    fn block_validation() {
        assert!(BlockSet::new(vec![(0, 1)]).is_err());
        assert!(BlockSet::new(vec![(3, 2), (4, 1)]).is_err());
        assert!(BlockSet::new(vec![(3, 0)]).is_err());
        let s = BlockSet::from_sorted([1, 2, 3, 7, 9, 10]).unwrap();
        assert_eq!(s.blocks(), &[(1, 3), (7, 1), (9, 2)]);
        assert!(s.contains(10) && !s.contains(8) && !s.contains(11));
    }

    fn block_set() -> impl Strategy<Value = BlockSet> {
        prop::collection::btree_set(1u64..300, 0..80).prop_map(|v| BlockSet::from_sorted(v).unwrap())
    }

    proptest! {
        #[test]
        fn density_monotone_under_inclusion(a in block_set(), b in block_set()) {
            let union: std::collections::BTreeSet<u64> = a.iter_up_to(300).chain(b.iter_up_to(300)).collect();
            let union = BlockSet::from_sorted(union).unwrap();
            prop_assert!(a.is_subset_of(&union));
            prop_assert!(upper_density(&a, 300).0 <= upper_density(&union, 300).0);
        }

        #[test]
        fn density_matches_brute_force(a in block_set(), n in 1u64..300) {
            let mut best = BigRational::zero();
            let mut count = 0;
            for k in 1..=n {
                if a.contains(k) {
                    count += 1;
                }
                best = best.max(BigRational::new(count.into(), k.into()));
            }
            prop_assert_eq!(upper_density(&a, n).0, best);
        }

        #[test]
        fn json_round_trip(a in block_set()) {
            let text = serde_json::to_string(&a).unwrap();
            prop_assert_eq!(serde_json::from_str::<BlockSet>(&text).unwrap(), a);
        }
    }
}
