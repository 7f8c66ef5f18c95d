//! Seeded Monte-Carlo experiments.
//!
//! Every trial draws from its own ChaCha8 stream: the child seed of trial `t`
//! is the first word of `ChaCha8Rng::seed_from_u64(seed)` moved to stream `t`.
//! Trials run in parallel and are gathered in trial order, so outputs do not
//! depend on the number of threads.

use std::fmt::{self, Display};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balanced::{grid_point, ReciprocalTable};
use crate::cf::{CfError, PartialQuotientSource};
use crate::dynamics::{CertifiedReal, DynamicsError, Orbit, Point};
use crate::enclosure::{Enclosure, Exponent};
use crate::output::write_bytes;
use crate::renorm::{
    convergence_bound, generate_schedule, BoundMode, CSequence, ConvergenceBound, GrowthRule, PeakSchedule,
    RenormError,
};

/// Caps the worker threads of every experiment.
pub const THREADS_ENV: &str = "CYLINDER_LAB_THREADS";
/// Numerator bits of a sampled rotation number.
pub const SAMPLED_BITS: u32 = 512;
/// Horizons above this sum `n^-δ` directly instead of through a table.
pub const TABLE_LIMIT: u64 = 4_000_000;
/// Partial quotients tabulated one by one in [`MeasureStats`].
pub const TABULATED_DIGITS: u64 = 10;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Diverge,
    Converge,
    Quotients,
}

impl Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Diverge => "diverge",
            Self::Converge => "converge",
            Self::Quotients => "quotients",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub table: PathBuf,
    pub summary: PathBuf,
}

/// A complete, reproducible description of one run.
///
/// `horizons` holds `[N₁, N₂]` for `diverge` and `quotients` and the
/// brute-force cap for `converge`. Unset fields take the defaults of
/// [`ExperimentManifest::new`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub trials: u64,
    pub horizons: Vec<u64>,
    /// Midpoint grid size for `converge`; `0` runs the single point `x = α`.
    #[serde(default)]
    pub grid: u64,
    /// Fixed rotation number for every trial instead of sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// Fixed rational base point instead of sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(with = "as_string")]
    pub delta: Exponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    /// Bound depth `K` for `converge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "optional_mode")]
    pub mode: Option<BoundMode>,
    /// Schedule JSON for `converge`; the generated schedule for `delta` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    /// Digit positions per trial for `quotients`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<usize>,
    pub outputs: OutputPaths,
}

mod optional_mode {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::renorm::BoundMode;

    pub fn serialize<S: Serializer>(v: &Option<BoundMode>, s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BoundMode>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl ExperimentManifest {
    /// Defaults: `diverge` 100 trials at `[10⁴, 10⁶]`; `converge` a 512-point
    /// grid to `10⁶` at depth 20; `quotients` 1000 trials at `[10², 10⁴]`
    /// with 100 digit positions each.
    pub fn new(name: &str, experiment: ExperimentKind, seed: u64) -> Self {
        let (trials, horizons, grid) = match experiment {
            ExperimentKind::Diverge => (100, vec![10_000, 1_000_000], 0),
            ExperimentKind::Converge => (0, vec![1_000_000], 512),
            ExperimentKind::Quotients => (1000, vec![100, 10_000], 0),
        };
        Self {
            name: name.to_string(),
            experiment,
            seed,
            trials,
            horizons,
            grid,
            alpha: None,
            x: None,
            delta: Exponent::ONE,
            precision_bits: None,
            depth: None,
            mode: None,
            schedule: None,
            digits: None,
            outputs: OutputPaths {
                table: PathBuf::from(format!("{name}_table.csv")),
                summary: PathBuf::from(format!("{name}_summary.json")),
            },
        }
    }

    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    fn two_horizons(&self) -> Result<(u64, u64), ExperimentError> {
        match self.horizons[..] {
            [a, b] if a < b && a >= 1 => Ok((a, b)),
            _ => Err(ExperimentError::Manifest(format!(
                "{} needs horizons [N1, N2] with 1 <= N1 < N2, got {:?}",
                self.experiment, self.horizons
            ))),
        }
    }

    fn fixed_alpha(&self) -> Result<Option<PartialQuotientSource>, ExperimentError> {
        Ok(self.alpha.as_deref().map(str::parse).transpose()?)
    }

    fn fixed_x(&self) -> Result<Option<Point>, ExperimentError> {
        self.x
            .as_deref()
            .map(|s| {
                let v: BigRational = s
                    .parse()
                    .map_err(|_| ExperimentError::Manifest(format!("x = {s:?} is not a rational")))?;
                Ok(Point::rational(v)?)
            })
            .transpose()
    }
}

/// Child seed of `trial`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.next_u64()
}

/// A uniform dyadic point `u / 2^64` from the second stream of `child`.
pub fn sample_point(child: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(child);
    rng.set_stream(1);
    let u = rng.next_u64();
    Point::rational(BigRational::new(u.into(), (BigUint::one() << 64u32).into())).expect("u / 2^64 < 1")
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a pool of `threads` workers, or the global pool.
pub fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    match threads {
        None => Ok(f()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Threads(e.to_string()))?
            .install(f)),
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// `Σ_{n ∈ times} n^-δ`.
fn power_sum(table: Option<&ReciprocalTable>, times: &[u64], delta: Exponent) -> Enclosure {
    match table {
        Some(t) => t.sum(times),
        None => times.iter().map(|&n| Enclosure::inv_pow(&BigUint::from(n), delta)).sum(),
    }
}

fn bounds(e: &Enclosure) -> (String, String) {
    e.to_decimal_bounds(20)
}

/// Rendered outputs of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentOutput {
    pub table: Vec<u8>,
    pub summary: Vec<u8>,
}

impl ExperimentOutput {
    fn new(table: Vec<u8>, summary: &impl Serialize) -> Result<Self, ExperimentError> {
        let mut summary = serde_json::to_vec_pretty(summary)?;
        summary.push(b'\n');
        Ok(Self { table, summary })
    }

    /// Writes both files under `dir`, each atomically.
    pub fn write(&self, dir: &Path, paths: &OutputPaths) -> Result<(PathBuf, PathBuf), ExperimentError> {
        let table = dir.join(&paths.table);
        let summary = dir.join(&paths.summary);
        write_bytes(&table, &self.table)?;
        write_bytes(&summary, &self.summary)?;
        Ok((table, summary))
    }
}

/// Runs a manifest on at most `threads` workers.
pub fn run_manifest(manifest: &ExperimentManifest, threads: Option<usize>) -> Result<ExperimentOutput, ExperimentError> {
    in_pool(threads, || match manifest.experiment {
        ExperimentKind::Diverge => run_divergence_experiment(manifest)?.render(),
        ExperimentKind::Converge => {
            let schedule = match &manifest.schedule {
                Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
                None => canonical_schedule(manifest.delta, manifest.depth.unwrap_or(20) + 1)?,
            };
            let grid = if manifest.grid == 0 {
                GridSpec::Alpha
            } else {
                GridSpec::Midpoints(manifest.grid)
            };
            let cap = *manifest.horizons.first().unwrap_or(&1_000_000);
            let mode = manifest.mode.unwrap_or(default_mode(manifest.delta));
            run_convergence_experiment(&schedule, grid, manifest.depth.unwrap_or(20), manifest.delta, mode, cap)?
                .render()
        }
        ExperimentKind::Quotients => run_quotient_statistics(manifest)?.render(),
    })?
}

// ---------------------------------------------------------------------------
// divergence

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceTrial {
    pub trial: u64,
    pub seed: u64,
    pub alpha: String,
    pub x: String,
    /// `#V(N₁)`, `#V(N₂)`; `None` for an excluded trial.
    pub counts: Option<[u64; 2]>,
    pub sums: Option<[Enclosure; 2]>,
    pub excluded: Option<String>,
}

impl DivergenceTrial {
    /// `S(N₂) / S(N₁)` at the midpoints, when `S(N₁) > 0`.
    pub fn ratio(&self) -> Option<f64> {
        let [s1, s2] = self.sums.as_ref()?;
        let counts = self.counts?;
        (counts[0] > 0).then(|| s2.midpoint_f64() / s1.midpoint_f64())
    }

    /// `S(N₂) > S(N₁)`, decided exactly by the counts.
    pub fn grows(&self) -> Option<bool> {
        self.counts.map(|[c1, c2]| c2 > c1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceSummary {
    pub trials: u64,
    pub included: u64,
    pub excluded: u64,
    pub growing: u64,
    pub growth_fraction: f64,
    pub median_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub name: String,
    pub seed: u64,
    pub horizons: [u64; 2],
    #[serde(with = "as_string")]
    pub delta: Exponent,
    #[serde(skip)]
    pub trials: Vec<DivergenceTrial>,
    pub summary: Option<DivergenceSummary>,
}

impl DivergenceReport {
    pub fn render(&self) -> Result<ExperimentOutput, ExperimentError> {
        let mut table = Vec::new();
        writeln!(
            table,
            "trial,seed,alpha,x,count_n1,count_n2,s_n1_lower,s_n1_upper,s_n2_lower,s_n2_upper,excluded"
        )?;
        for t in &self.trials {
            write!(table, "{},{},{},{},", t.trial, t.seed, t.alpha, t.x)?;
            match (&t.counts, &t.sums) {
                (Some([c1, c2]), Some([s1, s2])) => {
                    let ((l1, u1), (l2, u2)) = (bounds(s1), bounds(s2));
                    writeln!(table, "{c1},{c2},{l1},{u1},{l2},{u2},")?;
                }
                _ => writeln!(table, ",,,,,,{}", t.excluded.as_deref().unwrap_or(""))?,
            }
        }
        ExperimentOutput::new(table, self)
    }
}

fn divergence_trial(
    manifest: &ExperimentManifest,
    alpha: Option<&PartialQuotientSource>,
    x: Option<&Point>,
    table: Option<&ReciprocalTable>,
    trial: u64,
    (n1, n2): (u64, u64),
) -> DivergenceTrial {
    let seed = trial_seed(manifest.seed, trial);
    let bits = manifest.precision_bits.unwrap_or(SAMPLED_BITS);
    let point = x.cloned().unwrap_or_else(|| sample_point(seed));
    let mut row = DivergenceTrial {
        trial,
        seed,
        alpha: String::new(),
        x: point.offset().to_string(),
        counts: None,
        sums: None,
        excluded: None,
    };
    let run = || -> Result<Vec<u64>, ExperimentError> {
        let source = match alpha {
            Some(a) => a.clone(),
            None => PartialQuotientSource::sampled(seed, bits)?,
        };
        let alpha = CertifiedReal::new(&source)?;
        let mut orbit = Orbit::new(&alpha, point.clone())?;
        let mut times = Vec::new();
        for k in 1..=n2 {
            if orbit.advance()? == 0 {
                times.push(k);
            }
        }
        Ok(times)
    };
    row.alpha = match alpha {
        Some(a) => a.to_string(),
        None => format!("sampled:{seed}:{bits}"),
    };
    match run() {
        Ok(times) => {
            let split = times.partition_point(|&t| t <= n1);
            let s1 = power_sum(table, &times[..split], manifest.delta);
            let s2 = power_sum(table, &times, manifest.delta);
            row.counts = Some([split as u64, times.len() as u64]);
            row.sums = Some([s1, s2]);
        }
        Err(e) => row.excluded = Some(e.to_string().replace(',', ";")),
    }
    row
}

/// Partial sums `S(N) = Σ_{n ∈ V_{α,x}, n <= N} n^-δ` at two horizons for
/// sampled `(α, x)`. A trial whose comparisons exhaust the sampled
/// precision is excluded and counted.
pub fn run_divergence_experiment(manifest: &ExperimentManifest) -> Result<DivergenceReport, ExperimentError> {
    let (n1, n2) = manifest.two_horizons()?;
    let alpha = manifest.fixed_alpha()?;
    let x = manifest.fixed_x()?;
    let table = (manifest.trials > 0 && n2 <= TABLE_LIMIT).then(|| ReciprocalTable::new(n2, manifest.delta));
    let trials: Vec<DivergenceTrial> = (0..manifest.trials)
        .into_par_iter()
        .map(|t| divergence_trial(manifest, alpha.as_ref(), x.as_ref(), table.as_ref(), t, (n1, n2)))
        .collect();
    let summary = (!trials.is_empty()).then(|| {
        let included: Vec<&DivergenceTrial> = trials.iter().filter(|t| t.counts.is_some()).collect();
        let growing = included.iter().filter(|t| t.grows() == Some(true)).count() as u64;
        DivergenceSummary {
            trials: trials.len() as u64,
            included: included.len() as u64,
            excluded: (trials.len() - included.len()) as u64,
            growing,
            growth_fraction: if included.is_empty() {
                0.0
            } else {
                growing as f64 / included.len() as f64
            },
            median_ratio: median(included.iter().filter_map(|t| t.ratio()).collect()),
        }
    });
    Ok(DivergenceReport {
        name: manifest.name.clone(),
        seed: manifest.seed,
        horizons: [n1, n2],
        delta: manifest.delta,
        trials,
        summary,
    })
}

// ---------------------------------------------------------------------------
// convergence

/// Base points of a convergence run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpec {
    /// `x_j = (2j + 1)/(2G)`, `j < G`.
    Midpoints(u64),
    /// The single point `x = α`.
    Alpha,
}

impl GridSpec {
    fn points(&self) -> Vec<Point> {
        match *self {
            Self::Midpoints(g) => (0..g).map(|j| grid_point(j, g)).collect(),
            Self::Alpha => vec![Point::alpha_multiple_of(1)],
        }
    }
}

/// `M = 1`, `c_n = 2^-n`; the log rule with `r = 2` for `δ = 1` and the
/// δ rule without a step bound otherwise.
pub fn canonical_schedule(delta: Exponent, depth: usize) -> Result<PeakSchedule, RenormError> {
    let c = CSequence::geometric(BigRational::new(1.into(), 2.into()))?;
    if delta.is_one() {
        generate_schedule(&c, 1, Some(2), GrowthRule::Log, depth)
    } else {
        generate_schedule(&c, 1, None, GrowthRule::Delta(delta), depth)
    }
}

/// All windows for `δ = 1`; the windows meeting level zero for `δ < 1`,
/// where the full window count outgrows `q_{2k}^δ`.
pub fn default_mode(delta: Exponent) -> BoundMode {
    if delta.is_one() {
        BoundMode::Default
    } else {
        BoundMode::Tight
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridRow {
    pub j: u64,
    pub x: String,
    pub count: u64,
    pub sum: Enclosure,
}

/// Visits to level zero at times `0, ..., q_{2k} - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroVisits {
    pub k: usize,
    pub time: u64,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub depth: usize,
    #[serde(with = "as_string")]
    pub delta: Exponent,
    pub mode: BoundMode,
    pub horizon: u64,
    pub grid: u64,
    #[serde(skip)]
    pub rows: Vec<GridRow>,
    pub sup: Enclosure,
    pub sup_at: u64,
    pub bound: Enclosure,
    /// The sup is certainly at most the bound.
    pub within_bound: bool,
    pub partial_sums: Vec<Enclosure>,
    #[serde(skip)]
    pub certificate: ConvergenceBound,
    pub tail: Option<f64>,
    /// For `x = α` only.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub zero_visits: Vec<ZeroVisits>,
}

impl ConvergenceReport {
    pub fn render(&self) -> Result<ExperimentOutput, ExperimentError> {
        let mut table = Vec::new();
        writeln!(table, "j,x,count,lower,upper")?;
        for r in &self.rows {
            let (lo, hi) = bounds(&r.sum);
            writeln!(table, "{},{},{},{lo},{hi}", r.j, r.x, r.count)?;
        }
        ExperimentOutput::new(table, self)
    }
}

/// Empirical `sup_x Σ_{n ∈ V_{α,x}, n <= H} n^-δ` over a grid, with
/// `H = min(q_{2K}, cap)`, against the block bound at depth `K`.
pub fn run_convergence_experiment(
    schedule: &PeakSchedule,
    grid: GridSpec,
    depth: usize,
    delta: Exponent,
    mode: BoundMode,
    cap: u64,
) -> Result<ConvergenceReport, ExperimentError> {
    let certificate = convergence_bound(schedule, depth, delta, mode)?;
    let q = schedule.even_denominators();
    let horizon = q[depth].to_u64().map_or(cap, |v| v.min(cap));
    let alpha = CertifiedReal::new(&schedule.to_source()?)?;
    let table = (horizon <= TABLE_LIMIT).then(|| ReciprocalTable::new(horizon, delta));
    let points = grid.points();
    let checkpoints: Vec<u64> = q.iter().filter_map(|v| v.to_u64()).filter(|&v| v <= horizon).collect();
    let runs = points
        .par_iter()
        .map(|p| -> Result<(Vec<u64>, Vec<u64>), ExperimentError> {
            let mut orbit = Orbit::new(&alpha, p.clone())?;
            let mut times = Vec::new();
            // ℓ_0 = 0 is a visit at time 0.
            let mut visits = vec![0u64; checkpoints.len()];
            for k in 1..=horizon {
                if orbit.advance()? == 0 {
                    times.push(k);
                }
            }
            for (v, &c) in visits.iter_mut().zip(&checkpoints) {
                *v = 1 + times.partition_point(|&t| t < c) as u64;
            }
            Ok((times, visits))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<GridRow> = runs
        .iter()
        .zip(&points)
        .enumerate()
        .map(|(j, ((times, _), p))| GridRow {
            j: j as u64,
            x: match grid {
                GridSpec::Alpha => "alpha".into(),
                GridSpec::Midpoints(_) => p.offset().to_string(),
            },
            count: times.len() as u64,
            sum: power_sum(table.as_ref(), times, delta),
        })
        .collect();
    let (sup_at, sup) = rows
        .iter()
        .map(|r| &r.sum)
        .enumerate()
        .fold((0, Enclosure::zero()), |(i, best), (j, s)| {
            if s.upper() > best.upper() {
                (j, s.clone())
            } else {
                (i, best)
            }
        });
    let zero_visits = match grid {
        GridSpec::Alpha => checkpoints
            .iter()
            .zip(&runs[0].1)
            .enumerate()
            .map(|(k, (&time, &visits))| ZeroVisits { k, time, visits })
            .collect(),
        GridSpec::Midpoints(_) => Vec::new(),
    };
    Ok(ConvergenceReport {
        depth,
        delta,
        mode,
        horizon,
        grid: points.len() as u64,
        within_bound: sup.certainly_le(&certificate.total),
        sup_at: sup_at as u64,
        sup,
        bound: certificate.total.clone(),
        partial_sums: certificate.partial_sums(),
        tail: certificate.tail.as_ref().and_then(|t| t.tail.to_f64()),
        certificate,
        rows,
        zero_visits,
    })
}

// ---------------------------------------------------------------------------
// partial quotient statistics

/// Empirical digit frequencies against `L_k/(2 ln 2) <= G_k <= L_k/ln 2`,
/// `L_k = 1/(k(k+1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureStats {
    pub samples: u64,
    pub rows: Vec<DigitFrequency>,
    /// Digits above [`TABULATED_DIGITS`].
    pub larger: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitFrequency {
    pub k: u64,
    pub count: u64,
    pub frequency: f64,
    pub lebesgue: f64,
    pub lower: f64,
    pub upper: f64,
    pub standard_error: f64,
}

impl DigitFrequency {
    /// Inside the sandwich widened by `z` standard errors.
    pub fn inside(&self, z: f64) -> bool {
        let slack = z * self.standard_error;
        self.frequency >= self.lower - slack && self.frequency <= self.upper + slack
    }
}

impl MeasureStats {
    pub fn from_counts(counts: &[u64], larger: u64) -> Self {
        let samples = counts.iter().sum::<u64>() + larger;
        let n = samples.max(1) as f64;
        let ln2 = std::f64::consts::LN_2;
        let rows = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| {
                let k = i as u64 + 1;
                let lebesgue = 1.0 / (k * (k + 1)) as f64;
                let p = count as f64 / n;
                DigitFrequency {
                    k,
                    count,
                    frequency: p,
                    lebesgue,
                    lower: lebesgue / (2.0 * ln2),
                    upper: lebesgue / ln2,
                    standard_error: (p * (1.0 - p) / n).sqrt(),
                }
            })
            .collect();
        Self { samples, rows, larger }
    }

    pub fn frequency_total(&self) -> f64 {
        self.rows.iter().map(|r| r.frequency).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientTrial {
    pub trial: u64,
    pub seed: u64,
    /// Trusted partial quotients of the sample.
    pub available: usize,
    /// `#{n <= N₂ : A_n < 12 n ln n}`.
    pub below: Option<u64>,
    /// `Σ_{i<=N} 1/A_i` at both horizons.
    pub sums: Option<[Enclosure; 2]>,
    pub excluded: Option<String>,
}

impl QuotientTrial {
    pub fn fraction_below(&self, n: u64) -> Option<f64> {
        self.below.map(|b| b as f64 / n as f64)
    }

    pub fn ratio(&self) -> Option<f64> {
        self.sums.as_ref().map(|[a, b]| b.midpoint_f64() / a.midpoint_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientSummary {
    pub trials: u64,
    pub included: u64,
    pub excluded: u64,
    pub min_fraction_below: Option<f64>,
    pub median_fraction_below: Option<f64>,
    pub median_sum_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientReport {
    pub name: String,
    pub seed: u64,
    pub horizons: [u64; 2],
    pub precision_bits: u32,
    pub digits_per_trial: usize,
    pub measure: MeasureStats,
    #[serde(skip)]
    pub trials: Vec<QuotientTrial>,
    pub summary: Option<QuotientSummary>,
}

impl QuotientReport {
    /// Share of included trials whose fraction below `12 n ln n` is at least `t`.
    pub fn share_at_least(&self, t: f64) -> f64 {
        let n = self.horizons[1];
        let fractions: Vec<f64> = self.trials.iter().filter_map(|r| r.fraction_below(n)).collect();
        if fractions.is_empty() {
            return 0.0;
        }
        fractions.iter().filter(|&&f| f >= t).count() as f64 / fractions.len() as f64
    }

    pub fn render(&self) -> Result<ExperimentOutput, ExperimentError> {
        let mut table = Vec::new();
        writeln!(table, "trial,seed,available,below,sum_n1_lower,sum_n1_upper,sum_n2_lower,sum_n2_upper,excluded")?;
        for t in &self.trials {
            write!(table, "{},{},{},", t.trial, t.seed, t.available)?;
            match (t.below, &t.sums) {
                (Some(b), Some([s1, s2])) => {
                    let ((l1, u1), (l2, u2)) = (bounds(s1), bounds(s2));
                    writeln!(table, "{b},{l1},{u1},{l2},{u2},")?;
                }
                _ => writeln!(table, ",,,,,{}", t.excluded.as_deref().unwrap_or(""))?,
            }
        }
        ExperimentOutput::new(table, self)
    }
}

/// Sampled bits giving about `n` trusted partial quotients; each quotient
/// costs about `1.71` bits of denominator and a third of the bits is trusted.
pub fn bits_for_quotients(n: usize) -> u32 {
    u32::try_from(6 * n + 4096).expect("precision fits in u32")
}

/// `⌊12 n ln n⌋` for `2 <= n <= max`; index `n`. `12 n ln n` is irrational
/// for `n >= 2`, so `A_n < 12 n ln n` iff `A_n <= ⌊12 n ln n⌋`.
fn log_thresholds(max: u64) -> Vec<BigUint> {
    (0..=max)
        .into_par_iter()
        .map(|n| {
            if n < 2 {
                return BigUint::zero();
            }
            let n_big = BigUint::from(n);
            let e = Enclosure::ln(&n_big).mul_integer(&(n_big * 12u32));
            let (lo, hi) = (e.lower().floor(), e.upper().floor());
            assert_eq!(lo, hi, "12 n ln n too close to an integer at n = {n}");
            lo.to_integer().to_biguint().expect("non-negative")
        })
        .collect()
}

/// Digit statistics, the rate of `A_n < 12 n ln n` and the growth of
/// `Σ 1/A_i`, over sampled rotation numbers.
pub fn run_quotient_statistics(manifest: &ExperimentManifest) -> Result<QuotientReport, ExperimentError> {
    let (n1, n2) = manifest.two_horizons()?;
    let digits = manifest.digits.unwrap_or(100);
    let need = digits.max(n2 as usize);
    let bits = manifest.precision_bits.unwrap_or_else(|| bits_for_quotients(need));
    let thresholds = if manifest.trials > 0 { log_thresholds(n2) } else { Vec::new() };
    let results: Vec<(QuotientTrial, Vec<u64>)> = (0..manifest.trials)
        .into_par_iter()
        .map(|trial| -> Result<_, ExperimentError> {
            let seed = trial_seed(manifest.seed, trial);
            let source = PartialQuotientSource::sampled(seed, bits)?;
            let available = source.len().unwrap_or(0);
            let mut tally = vec![0u64; TABULATED_DIGITS as usize + 1];
            for i in 1..=digits.min(available) {
                let a = source.quotient(i)?;
                let slot = a.to_u64().filter(|&a| a <= TABULATED_DIGITS).unwrap_or(0) as usize;
                tally[slot] += 1;
            }
            let mut row = QuotientTrial {
                trial,
                seed,
                available,
                below: None,
                sums: None,
                excluded: None,
            };
            if available < need {
                row.excluded = Some(format!("only {available} trusted quotients"));
                return Ok((row, vec![0; tally.len()]));
            }
            let mut a_sum = BigUint::zero();
            let mut below = 0;
            let mut acc = Enclosure::zero();
            let mut first = Enclosure::zero();
            for n in 1..=n2 {
                a_sum += source.quotient(n as usize)?;
                if n >= 2 && a_sum <= thresholds[n as usize] {
                    below += 1;
                }
                acc += &Enclosure::inv_pow(&a_sum, Exponent::ONE);
                if n == n1 {
                    first = acc.clone();
                }
            }
            row.below = Some(below);
            row.sums = Some([first, acc]);
            Ok((row, tally))
        })
        .collect::<Result<_, _>>()?;
    let mut counts = vec![0u64; TABULATED_DIGITS as usize + 1];
    for (_, tally) in &results {
        for (c, t) in counts.iter_mut().zip(tally) {
            *c += t;
        }
    }
    let measure = MeasureStats::from_counts(&counts[1..], counts[0]);
    let trials: Vec<QuotientTrial> = results.into_iter().map(|(t, _)| t).collect();
    let summary = (!trials.is_empty()).then(|| {
        let fractions: Vec<f64> = trials.iter().filter_map(|t| t.fraction_below(n2)).collect();
        let included = fractions.len() as u64;
        QuotientSummary {
            trials: trials.len() as u64,
            included,
            excluded: trials.len() as u64 - included,
            min_fraction_below: fractions.iter().copied().reduce(f64::min),
            median_fraction_below: median(fractions),
            median_sum_ratio: median(trials.iter().filter_map(QuotientTrial::ratio).collect()),
        }
    });
    Ok(QuotientReport {
        name: manifest.name.clone(),
        seed: manifest.seed,
        horizons: [n1, n2],
        precision_bits: bits,
        digits_per_trial: digits,
        measure,
        trials,
        summary,
    })
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diverge" => Ok(Self::Diverge),
            "converge" => Ok(Self::Converge),
            "quotients" => Ok(Self::Quotients),
            other => Err(ExperimentError::Manifest(format!("unknown experiment {other:?}"))),
        }
    }
}

pub mod suites;

#[cfg(test)]
mod tests;
