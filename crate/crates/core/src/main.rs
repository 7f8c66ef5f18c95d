use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use cylinder_lab::balanced::{self, level_occupancy_with_budget, reciprocal_sum};
use cylinder_lab::cf::{self, PartialQuotientSource};
use cylinder_lab::dynamics::{self, CertifiedReal, Point, TraceFormat, DEFAULT_BUDGET};
use cylinder_lab::enclosure::Exponent;
use cylinder_lab::experiments::suites::{self, Suite};
use cylinder_lab::experiments::{self, canonical_schedule, default_mode, ExperimentKind, ExperimentManifest};
use cylinder_lab::output::write_bytes;
use cylinder_lab::renorm::{
    self, convergence_bound, generate_schedule, peak_histogram_with_budget, BoundMode, CSequence, GrowthRule,
    PeakSchedule,
};
use cylinder_lab::seqtools::{self, BRule, BlockSet, SparseSetSpec};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed")]
    VerifyFailed,
    #[error(transparent)]
    Cf(#[from] cf::CfError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Renorm(#[from] renorm::RenormError),
    #[error(transparent)]
    Seq(#[from] seqtools::SeqError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceArg {
    Csv,
    Rle,
}

/// Exact experiments on balanced times of irrational circle rotations.
#[derive(Debug, Parser)]
#[command(name = "cylinder-lab", version, arg_required_else_help = true)]
struct Cli {
    /// Seed for sampled rotation numbers and base points.
    #[arg(long, global = true, default_value_t = 2026)]
    seed: u64,
    /// Write results into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Numerator bits of sampled rotation numbers in experiments.
    #[arg(long, global = true)]
    precision_bits: Option<u32>,
    /// Largest number of orbit steps or histogram levels a command may take.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget_steps: u64,
    #[arg(long, global = true, value_enum, default_value_t = TraceArg::Csv)]
    trace_format: TraceArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergents p_n/q_n for n = 1..=N.
    Convergents {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        n: usize,
    },
    /// Levels ℓ_1..ℓ_N of one orbit.
    Orbit(OrbitArgs),
    /// Balanced times up to N and their reciprocal sum.
    Balanced {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long, default_value = "1")]
        delta: String,
    },
    /// Visits to each level up to N.
    Occupancy(OrbitArgs),
    /// Peak histogram H_n of a constructed schedule.
    Peaks {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long)]
        depth: usize,
    },
    /// Generates a schedule from a target sequence and growth rule.
    Schedule {
        #[arg(long, default_value = "geometric:1/2")]
        c: String,
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long, default_value = "log")]
        rule: String,
        #[arg(long)]
        depth: usize,
    },
    /// Block bounds for Σ n^-δ over balanced times.
    Bound {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, default_value = "1")]
        delta: String,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Upper densities and subset sums.
    Prop1 {
        #[command(subcommand)]
        action: Prop1Action,
    },
    /// Seeded experiments.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentCommand,
    },
    /// Runs the property suites.
    Verify {
        /// max-level, one-per-interval, renorm or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Largest q_n checked; 10^5 for max-level and 10^4 for one-per-interval by default.
        #[arg(long)]
        max_q: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct OrbitArgs {
    /// Source descriptor such as periodic:1, explicit:1,2,3 or sampled:SEED:BITS.
    #[arg(long)]
    alpha: String,
    /// Base point: a rational in [0,1), alpha, or 1/4+2alpha.
    #[arg(long, default_value = "0")]
    x: String,
    #[arg(long)]
    n: u64,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Schedule JSON; the generated schedule for --delta otherwise.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Comma-separated a_i.
    #[arg(long, requires = "b", conflicts_with = "schedule")]
    a: Option<String>,
    /// Comma-separated b_i.
    #[arg(long, requires = "a")]
    b: Option<String>,
    #[arg(long)]
    m: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Prop1Action {
    /// Σ_{n ∈ S, n <= N} b_n^δ.
    Sum {
        #[arg(long)]
        rule: String,
        /// evens, range:LO-HI or a JSON file of blocks.
        #[arg(long)]
        set: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "1")]
        delta: String,
        /// Exact rational sum for δ = 1.
        #[arg(long)]
        exact: bool,
    },
    /// max_{n <= N} #(S ∩ [1, n]) / n.
    Density {
        #[arg(long)]
        set: String,
        #[arg(long)]
        n: u64,
    },
    /// A set of upper density at least ε/2 with Σ b_n < ε.
    Counterexample {
        #[arg(long)]
        rule: String,
        #[arg(long, default_value = "1/4")]
        epsilon: String,
        #[arg(long, default_value_t = 6)]
        markers: usize,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Manifest JSON; flags below override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated horizons.
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    grid: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    digits: Option<usize>,
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    Diverge(ExperimentArgs),
    Converge(ExperimentArgs),
    Quotients(ExperimentArgs),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(usage)
}

fn u64_list(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',').map(|v| parse(v.trim())).collect()
}

struct Ctx {
    out: Option<PathBuf>,
    format: Format,
}

impl Ctx {
    /// Writes `bytes` to `<out>/<name>` or stdout.
    fn emit(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(name);
                write_bytes(&path, bytes)?;
                eprintln!("wrote {}", path.display());
            }
            None => io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, stem: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.emit(&format!("{stem}.json"), &bytes)
    }

    /// CSV from `csv` or JSON from `value`, by `--format`.
    fn emit_either<T: Serialize>(
        &self,
        stem: &str,
        value: &T,
        csv: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        match self.format {
            Format::Json => self.emit_json(stem, value),
            Format::Csv => {
                let mut bytes = Vec::new();
                csv(&mut bytes)?;
                self.emit(&format!("{stem}.csv"), &bytes)
            }
        }
    }
}

fn load_schedule(args: &ScheduleArgs, delta: Exponent, depth: usize) -> Result<PeakSchedule, CliError> {
    if let Some(path) = &args.schedule {
        return Ok(serde_json::from_slice(&std::fs::read(path)?)?);
    }
    match (&args.a, &args.b) {
        (Some(a), Some(b)) => {
            let (a, b) = (u64_list(a)?, u64_list(b)?);
            let m = args.m.unwrap_or_else(|| b.iter().copied().max().unwrap_or(1));
            Ok(PeakSchedule::from_u64(&a, &b, m)?)
        }
        _ => Ok(canonical_schedule(delta, depth)?),
    }
}

fn load_set(spec: &str, n: u64) -> Result<BlockSet, CliError> {
    if spec == "evens" {
        return Ok(BlockSet::evens(n));
    }
    if let Some(range) = spec.strip_prefix("range:") {
        let (lo, hi) = range.split_once('-').ok_or_else(|| usage(format!("bad range {range:?}")))?;
        return Ok(BlockSet::range(parse(lo)?, parse(hi)?)?);
    }
    let bytes = std::fs::read(spec)?;
    match serde_json::from_slice::<SparseSetSpec>(&bytes) {
        Ok(sparse) => Ok(sparse.blocks),
        Err(_) => Ok(serde_json::from_slice::<BlockSet>(&bytes)?),
    }
}

fn manifest_for(kind: ExperimentKind, args: &ExperimentArgs, cli: &Cli) -> Result<ExperimentManifest, CliError> {
    let mut m = match &args.manifest {
        Some(path) => ExperimentManifest::read(path)?,
        None => ExperimentManifest::new(args.name.as_deref().unwrap_or(&kind.to_string()), kind, cli.seed),
    };
    if m.experiment != kind {
        return Err(usage(format!("manifest is for {}, not {kind}", m.experiment)));
    }
    if args.manifest.is_none() {
        m.seed = cli.seed;
    }
    if let Some(t) = args.trials {
        m.trials = t;
    }
    if let Some(h) = &args.horizons {
        m.horizons = u64_list(h)?;
    }
    if let Some(g) = args.grid {
        m.grid = g;
    }
    if let Some(d) = args.depth {
        m.depth = Some(d);
    }
    if let Some(d) = &args.delta {
        m.delta = parse(d)?;
    }
    if let Some(mode) = &args.mode {
        m.mode = Some(parse(mode)?);
    }
    if args.alpha.is_some() {
        m.alpha = args.alpha.clone();
    }
    if args.x.is_some() {
        m.x = args.x.clone();
    }
    if args.digits.is_some() {
        m.digits = args.digits;
    }
    if args.schedule.is_some() {
        m.schedule = args.schedule.clone();
    }
    if cli.precision_bits.is_some() {
        m.precision_bits = cli.precision_bits;
    }
    Ok(m)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        out: cli.out.clone(),
        format: cli.format,
    };
    let budget = cli.budget_steps;
    match &cli.command {
        Command::Convergents { alpha, n } => {
            let source: PartialQuotientSource = parse(alpha)?;
            let rows = cf::convergents(&source, *n)?;
            let rows = &rows[1..];
            ctx.emit_either("convergents", &rows, |out| {
                writeln!(out, "n,p,q")?;
                for c in rows {
                    writeln!(out, "{},{},{}", c.n, c.p, c.q)?;
                }
                Ok(())
            })
        }
        Command::Orbit(args) => {
            let alpha = CertifiedReal::new(&parse(&args.alpha)?)?;
            let x: Point = parse(&args.x)?;
            if args.n > budget {
                return Err(usage(format!("{} steps exceed --budget-steps {budget}", args.n)));
            }
            let trace = dynamics::iterate_levels(&alpha, &x, args.n)?;
            let (format, name) = match cli.trace_format {
                TraceArg::Csv => (TraceFormat::Csv, "levels.csv"),
                TraceArg::Rle => (TraceFormat::Rle, "levels.rle"),
            };
            let mut bytes = Vec::new();
            trace.write(format, &mut bytes)?;
            ctx.emit(name, &bytes)
        }
        Command::Balanced { orbit, delta } => {
            let delta: Exponent = parse(delta)?;
            let alpha = CertifiedReal::new(&parse(&orbit.alpha)?)?;
            let x: Point = parse(&orbit.x)?;
            let set = if orbit.n > balanced::LIST_LIMIT {
                balanced::balanced_count(&alpha, &x, orbit.n, delta, budget)?
            } else {
                balanced::balanced_times_with_budget(&alpha, &x, orbit.n, budget)?
            };
            let sum = reciprocal_sum(&set, delta)?;
            let (lo, hi) = sum.to_decimal_bounds(30);
            eprintln!("#V = {}, sum of n^-{delta} in [{lo}, {hi}]", set.count());
            #[derive(Serialize)]
            struct Out<'a> {
                set: &'a balanced::BalancedSet,
                sum: &'a cylinder_lab::enclosure::Enclosure,
            }
            ctx.emit_either("balanced", &Out { set: &set, sum: &sum }, |out| set.write_csv(out))
        }
        Command::Occupancy(args) => {
            let alpha = CertifiedReal::new(&parse(&args.alpha)?)?;
            let occ = level_occupancy_with_budget(&alpha, &parse(&args.x)?, args.n, budget)?;
            ctx.emit_either("occupancy", &occ, |out| occ.write_csv(out))
        }
        Command::Peaks { schedule, depth } => {
            let s = load_schedule(schedule, Exponent::ONE, *depth)?;
            let h = peak_histogram_with_budget(&s, *depth, budget)?;
            ctx.emit_either("peaks", &h, |out| h.write_csv(out))
        }
        Command::Schedule { c, m, r, rule, depth } => {
            let c: CSequence = parse(c)?;
            let rule: GrowthRule = parse(rule)?;
            let s = generate_schedule(&c, *m, *r, rule, *depth)?;
            ctx.emit_json("schedule", &s)
        }
        Command::Bound {
            schedule,
            depth,
            delta,
            mode,
        } => {
            let delta: Exponent = parse(delta)?;
            let mode: BoundMode = match mode {
                Some(m) => parse(m)?,
                None => default_mode(delta),
            };
            let s = load_schedule(schedule, delta, depth + 1)?;
            let bound = convergence_bound(&s, *depth, delta, mode)?;
            let (lo, hi) = bound.total.to_decimal_bounds(20);
            eprintln!("total in [{lo}, {hi}]");
            if let Some(t) = &bound.tail {
                eprintln!("tail after depth {depth} <= {:.3e}", num_traits::ToPrimitive::to_f64(&t.tail).unwrap_or(f64::NAN));
            }
            ctx.emit_either("bound", &bound, |out| bound.write_csv(out))
        }
        Command::Prop1 { action } => run_prop1(&ctx, action),
        Command::Experiment { kind } => {
            let (k, args) = match kind {
                ExperimentCommand::Diverge(a) => (ExperimentKind::Diverge, a),
                ExperimentCommand::Converge(a) => (ExperimentKind::Converge, a),
                ExperimentCommand::Quotients(a) => (ExperimentKind::Quotients, a),
            };
            let manifest = manifest_for(k, args, cli)?;
            let output = experiments::run_manifest(&manifest, experiments::thread_cap_from_env())?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let (table, summary) = output.write(&dir, &manifest.outputs)?;
            let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
            manifest_bytes.push(b'\n');
            write_bytes(&dir.join(format!("{}_manifest.json", manifest.name)), &manifest_bytes)?;
            io::stdout().write_all(&output.summary)?;
            eprintln!("wrote {} and {}", table.display(), summary.display());
            Ok(())
        }
        Command::Verify { suite, trials, max_q } => {
            let chosen: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![parse(suite)?]
            };
            let mut ok = true;
            for s in chosen {
                let report = match s {
                    Suite::MaxLevel => suites::level_bound_suite(cli.seed, *trials, max_q.unwrap_or(100_000)),
                    Suite::OnePerInterval => {
                        suites::one_per_interval_suite(cli.seed, *trials, max_q.unwrap_or(10_000))
                    }
                    Suite::Renorm => suites::renorm_suite(budget),
                };
                println!("{report}");
                ok &= report.ok();
            }
            if ok {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
    }
}

fn run_prop1(ctx: &Ctx, action: &Prop1Action) -> Result<(), CliError> {
    match action {
        Prop1Action::Sum {
            rule,
            set,
            n,
            delta,
            exact,
        } => {
            let rule: BRule = parse(rule)?;
            let delta: Exponent = parse(delta)?;
            let blocks = load_set(set, *n)?;
            let mut out = String::new();
            if *exact {
                if !delta.is_one() {
                    return Err(usage("--exact needs delta 1"));
                }
                out.push_str(&format!("exact,{}\n", seqtools::subset_sum_exact(&rule, &blocks, *n)?));
            }
            let (lo, hi) = seqtools::subset_sum(&rule, &blocks, *n, delta)?.to_decimal_bounds(30);
            out.push_str(&format!("lower,{lo}\nupper,{hi}\n"));
            ctx.emit("sum.csv", out.as_bytes())
        }
        Prop1Action::Density { set, n } => {
            let blocks = load_set(set, *n)?;
            let (d, at) = seqtools::upper_density(&blocks, *n);
            ctx.emit("density.csv", format!("density,at\n{d},{at}\n").as_bytes())
        }
        Prop1Action::Counterexample { rule, epsilon, markers } => {
            let rule: BRule = parse(rule)?;
            let eps: BigRational = parse(epsilon)?;
            let spec = seqtools::build_counterexample(&rule, &eps, *markers)?;
            let (d, _) = seqtools::upper_density(&spec.blocks, spec.horizon());
            eprintln!(
                "sum <= {} < {eps}; density at horizon {} = {d}",
                spec.chain_bound()?,
                spec.horizon()
            );
            ctx.emit_json("counterexample", &spec)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::VerifyFailed) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
