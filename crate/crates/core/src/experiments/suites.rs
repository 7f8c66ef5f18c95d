//! Property suites run by `verify`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::{sample_point, trial_seed, ExperimentError, SAMPLED_BITS};
use crate::cf::{Convergents, PartialQuotientSource};
use crate::dynamics::{check_one_per_interval, CertifiedReal, Orbit, Point};
use crate::renorm::{brute_force_histogram, peak_histogram, peak_support, PeakSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// `|ℓ_{q_n}| <= 3` and `max_{i <= q_n} |ℓ_i| <= 3A_n`.
    MaxLevel,
    /// One orbit point per interval of length `1/q_n`.
    OnePerInterval,
    /// Renormalized histograms against brute force, with `|supp H_n| = A_n + 1`.
    Renorm,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::MaxLevel, Suite::OnePerInterval, Suite::Renorm];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxLevel => "max-level",
            Self::OnePerInterval => "one-per-interval",
            Self::Renorm => "renorm",
        })
    }
}

impl FromStr for Suite {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| ExperimentError::Manifest(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: u64,
    pub passed: u64,
    /// Individual checks performed.
    pub cases: u64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.passed == self.trials
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}/{} passes ({} checks)",
            self.suite, self.passed, self.trials, self.cases
        )?;
        for failure in &self.failures {
            write!(f, "\n  {failure}")?;
        }
        Ok(())
    }
}

/// Outcome of one trial: checks run and the first violation, if any.
type TrialOutcome = Result<(u64, Option<String>), ExperimentError>;

fn collect(suite: Suite, outcomes: Vec<(u64, TrialOutcome)>) -> SuiteReport {
    let mut report = SuiteReport {
        suite,
        trials: outcomes.len() as u64,
        passed: 0,
        cases: 0,
        failures: Vec::new(),
    };
    for (trial, outcome) in outcomes {
        match outcome {
            Ok((cases, None)) => {
                report.cases += cases;
                report.passed += 1;
            }
            Ok((cases, Some(msg))) => {
                report.cases += cases;
                report.failures.push(format!("trial {trial}: {msg}"));
            }
            Err(e) => report.failures.push(format!("trial {trial}: {e}")),
        }
    }
    report
}

fn sampled_pair(seed: u64, trial: u64) -> Result<(CertifiedReal, Point), ExperimentError> {
    let child = trial_seed(seed, trial);
    let source = PartialQuotientSource::sampled(child, SAMPLED_BITS)?;
    Ok((CertifiedReal::new(&source)?, sample_point(child)))
}

/// `(n, q_n, A_n)` for `n >= 1` with `q_n <= max_q`.
fn denominators(source: &PartialQuotientSource, max_q: u64) -> Result<Vec<(usize, u64, u64)>, ExperimentError> {
    let mut out = Vec::new();
    let mut a_sum = 0u64;
    for c in Convergents::new(source).skip(1) {
        let c = c?;
        match c.q.to_u64().filter(|&q| q <= max_q) {
            Some(q) => {
                a_sum += source.quotient(c.n)?.to_u64().expect("a_n <= q_n");
                out.push((c.n, q, a_sum));
            }
            None => break,
        }
    }
    Ok(out)
}

fn max_level_trial(seed: u64, trial: u64, max_q: u64) -> TrialOutcome {
    let (alpha, x) = sampled_pair(seed, trial)?;
    let checkpoints = denominators(alpha.source(), max_q)?;
    let mut orbit = Orbit::new(&alpha, x)?;
    let mut max = 0i64;
    let mut cases = 0;
    for &(n, q, a_sum) in &checkpoints {
        while orbit.steps() < q {
            max = max.max(orbit.advance()?.abs());
        }
        cases += 2;
        if orbit.level().abs() > 3 {
            return Ok((cases, Some(format!("|ℓ_q{n}| = {} at q = {q}", orbit.level().abs()))));
        }
        if max > 3 * a_sum as i64 {
            return Ok((cases, Some(format!("max level {max} > 3·A_{n} = {}", 3 * a_sum))));
        }
    }
    Ok((cases, None))
}

/// Level bounds along sampled `(α, x)` for every `q_n <= max_q`.
pub fn level_bound_suite(seed: u64, trials: u64, max_q: u64) -> SuiteReport {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| (t, max_level_trial(seed, t, max_q)))
        .collect();
    collect(Suite::MaxLevel, outcomes)
}

fn one_per_interval_trial(seed: u64, trial: u64, max_q: u64) -> TrialOutcome {
    let (mut alpha, x) = sampled_pair(seed, trial)?;
    let checkpoints = denominators(alpha.source(), max_q)?;
    let mut cases = 0;
    for &(n, q, _) in &checkpoints {
        cases += 1;
        if !check_one_per_interval(&mut alpha, &x, n, q)? {
            return Ok((cases, Some(format!("two points share a cell at q_{n} = {q}"))));
        }
    }
    Ok((cases, None))
}

/// Orbit points spread one per `1/q_n`-cell for every `q_n <= max_q`.
pub fn one_per_interval_suite(seed: u64, trials: u64, max_q: u64) -> SuiteReport {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| (t, one_per_interval_trial(seed, t, max_q)))
        .collect();
    collect(Suite::OnePerInterval, outcomes)
}

/// Every schedule with `a_i, b_i ∈ values` of the given depth.
pub fn small_schedules(values: &[u64], depth: usize) -> Vec<PeakSchedule> {
    let m = *values.iter().max().expect("non-empty values");
    let k = values.len();
    (0..k.pow(2 * depth as u32))
        .map(|mut code| {
            let mut digits = Vec::with_capacity(2 * depth);
            for _ in 0..2 * depth {
                digits.push(values[code % k]);
                code /= k;
            }
            let (a, b) = digits.split_at(depth);
            PeakSchedule::from_u64(a, b, m).expect("positive values within M")
        })
        .collect()
}

fn renorm_trial(schedule: &PeakSchedule, budget: u64) -> TrialOutcome {
    let sums = schedule.a_sums();
    let mut cases = 0;
    for n in 0..=schedule.depth() {
        let fast = peak_histogram(schedule, n)?;
        let brute = brute_force_histogram(schedule, n, budget)?;
        cases += 2;
        if fast != brute {
            return Ok((cases, Some(format!("histogram mismatch at depth {n}"))));
        }
        let support = BigUint::from(fast.support_size());
        if support != &sums[n] + 1u32 || peak_support(schedule, n)?.size() != support {
            return Ok((cases, Some(format!("support {support} != A_{n} + 1 = {}", &sums[n] + 1u32))));
        }
    }
    Ok((cases, None))
}

/// All schedules with entries in `{1, 2, 3}` of depth 3, every prefix depth.
pub fn renorm_suite(budget: u64) -> SuiteReport {
    let schedules = small_schedules(&[1, 2, 3], 3);
    let outcomes = schedules
        .par_iter()
        .enumerate()
        .map(|(i, s)| (i as u64, renorm_trial(s, budget)))
        .collect();
    collect(Suite::Renorm, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_a_few_trials() {
        let r = level_bound_suite(7, 4, 10_000);
        assert!(r.ok(), "{r}");
        assert!(r.cases > 0);
        let r = one_per_interval_suite(7, 3, 2_000);
        assert!(r.ok(), "{r}");
    }

    #[test]
    fn small_schedule_enumeration() {
        let all = small_schedules(&[1, 2, 3], 2);
        assert_eq!(all.len(), 81);
        let distinct: std::collections::BTreeSet<String> =
            all.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
        assert_eq!(distinct.len(), 81);
    }

    #[test]
    fn suite_names() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("levels".parse::<Suite>().is_err());
    }

    #[test]
    fn report_counts_failures() {
        let r = collect(
            Suite::MaxLevel,
            vec![(0, Ok((3, None))), (1, Ok((2, Some("bad".into())))), (2, Err(ExperimentError::Manifest("x".into())))],
        );
        assert_eq!((r.trials, r.passed, r.cases), (3, 1, 5));
        assert!(!r.ok());
        assert!(r.to_string().starts_with("max-level: 1/3 passes"));
    }
}
