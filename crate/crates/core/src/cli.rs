//! Command-line front end. Payloads go to stdout or the requested files;
//! diagnostics and logs go to stderr.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage or I/O failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bayes::{simulate_run, SampleComplexity};
use crate::error::Error;
use crate::expgen::{run_experiment, ExperimentSpec};
use crate::metrics::Metric;
use crate::model::{validate, Instance};
use crate::solvers::{
    brute_force_mcis, brute_force_mpis, certify_mcis, certify_mpis, greedy_mcis, greedy_mpis,
    McisProblem, MpisProblem,
};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "PENALTYSELECT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "penaltyselect",
    version,
    about = "Penalty-aware information source selection"
)]
pub struct Cli {
    /// Worker threads for experiments; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance file; violations are printed to stderr as JSON lines.
    Validate(InstanceArgs),
    /// Select sources greedily (or exhaustively) and print the solution JSON.
    Solve(SolveArgs),
    /// Simulate Bayesian belief updates and write the belief trajectory CSV.
    Simulate(SimulateArgs),
    /// Run a batch experiment described by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    pub instance: PathBuf,
    /// Rescale penalty rows to sum to one before use.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Max,
    Total,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Max => Metric::MaxPenalty,
            MetricArg::Total => Metric::TotalPenalty,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    /// Minimum-cost selection under penalty bounds.
    #[arg(long, conflicts_with = "mpis", required_unless_present = "mpis")]
    pub mcis: bool,
    /// Budgeted penalty minimization.
    #[arg(long)]
    pub mpis: bool,
    #[arg(long, value_enum, default_value = "max")]
    pub metric: MetricArg,
    /// Per-hypothesis bounds, comma separated, or `@file` holding a JSON
    /// array or comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: Option<String>,
    /// Cost budget, or `@file` holding it.
    #[arg(long)]
    pub budget: Option<String>,
    /// Return the exhaustive optimum instead of the greedy solution.
    #[arg(long)]
    pub brute_force: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    /// Source indices, comma separated; all sources when omitted.
    #[arg(long)]
    pub subset: Option<String>,
    /// True hypothesis, by index or label.
    #[arg(long, default_value = "0")]
    pub true_theta: String,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Deviation allowance; half the smallest positive divergence by default.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub mu_th: f64,
    /// Trajectory CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Diagnostics JSON destination; stderr when omitted.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub spec: PathBuf,
    /// Overrides the spec's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Summary JSON destination; next to the CSV, or stderr without one.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Json(_) | Error::Csv(_) | Error::Io(_) => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Experiment(a) => cmd_experiment(&a, cli.threads),
    }
}

fn load(args: &InstanceArgs) -> CliResult<Instance> {
    let text = std::fs::read_to_string(&args.instance)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.instance.display())))?;
    let file: crate::model::InstanceFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", args.instance.display())))?;
    Ok(file.into_instance(args.renormalize)?)
}

fn load_valid(args: &InstanceArgs) -> CliResult<Instance> {
    let inst = load(args)?;
    inst.ensure_valid()?;
    Ok(inst)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::usage(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Reads an inline value or the contents of `@file`.
fn inline_or_file(raw: &str) -> CliResult<String> {
    match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {path}: {e}"))),
        None => Ok(raw.to_string()),
    }
}

/// Parses a JSON array or a comma-separated list of reals.
pub fn parse_reals(raw: &str) -> Result<Vec<f64>, String> {
    let text = raw.trim();
    if text.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| format!("bad list {text:?}: {e}"));
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: {:?}", t.trim()))
        })
        .collect()
}

fn parse_indices(raw: &str) -> Result<Vec<usize>, String> {
    let text = raw.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("not an index: {:?}", t.trim()))
        })
        .collect()
}

/// Seed from [`SEED_ENV`] when set, otherwise `fallback`.
pub fn effective_seed(fallback: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

fn cmd_validate(args: &InstanceArgs) -> CliResult<u8> {
    let inst = match load(args) {
        Ok(i) => i,
        Err(e) if e.code == 1 => {
            eprintln!(
                "{}",
                json!({"code": "invalid_structure", "message": e.message})
            );
            return Ok(1);
        }
        Err(e) => return Err(e),
    };
    let violations = validate(&inst);
    for v in &violations {
        eprintln!("{}", serde_json::to_string(v).map_err(Error::from)?);
    }
    Ok(if violations.is_empty() { 0 } else { 1 })
}

fn cmd_solve(args: &SolveArgs) -> CliResult<u8> {
    let inst = load_valid(&args.input)?;
    let metric = Metric::from(args.metric);
    let solution = if args.mcis {
        if args.budget.is_some() {
            return Err(CliError::usage("--budget applies to --mpis"));
        }
        let raw = args
            .bounds
            .as_deref()
            .ok_or_else(|| CliError::usage("--mcis needs --bounds"))?;
        let bounds = parse_reals(&inline_or_file(raw)?).map_err(CliError::usage)?;
        let problem = McisProblem::new(&inst, bounds, metric)?;
        if args.brute_force {
            brute_force_mcis(&problem)?
        } else {
            let mut s = greedy_mcis(&problem)?;
            if inst.n() <= crate::solvers::BRUTE_FORCE_LIMIT {
                certify_mcis(&problem, &mut s)?;
            } else {
                let gamma = crate::solvers::certificate_gamma(
                    &inst,
                    metric,
                    &crate::metrics::SetFunction::Coverage {
                        bounds: problem.bounds().to_vec(),
                        metric,
                    },
                );
                s.certificate = Some(crate::solvers::mcis_guarantee(&s, None, gamma));
            }
            s
        }
    } else {
        if args.bounds.is_some() {
            return Err(CliError::usage("--bounds applies to --mcis"));
        }
        let raw = args
            .budget
            .as_deref()
            .ok_or_else(|| CliError::usage("--mpis needs --budget"))?;
        let text = inline_or_file(raw)?;
        let budget: f64 = text
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("budget is not a number: {:?}", text.trim())))?;
        let problem = MpisProblem::new(&inst, budget, metric)?;
        if args.brute_force {
            brute_force_mpis(&problem)?
        } else {
            let mut s = greedy_mpis(&problem)?;
            if inst.n() <= crate::solvers::BRUTE_FORCE_LIMIT {
                certify_mpis(&problem, &mut s)?;
            } else {
                let gamma = crate::solvers::certificate_gamma(
                    &inst,
                    metric,
                    &crate::metrics::SetFunction::Utility(metric),
                );
                s.certificate = Some(crate::solvers::mpis_guarantee(&s, None, gamma));
            }
            s
        }
    };
    emit_json(&solution, args.output.as_deref())?;
    Ok(0)
}

fn resolve_theta(inst: &Instance, raw: &str) -> CliResult<usize> {
    if let Ok(i) = raw.parse::<usize>() {
        inst.check_hypothesis(i)?;
        return Ok(i);
    }
    inst.hypotheses()
        .labels()
        .iter()
        .position(|l| l == raw)
        .ok_or_else(|| CliError::domain(format!("unknown hypothesis {raw:?}")))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<u8> {
    let inst = load_valid(&args.input)?;
    if inst.likelihood_sources().is_err() {
        return Err(CliError::domain("simulation requires likelihoods"));
    }
    let subset = match &args.subset {
        Some(raw) => inst.source_set(&parse_indices(raw).map_err(CliError::usage)?)?,
        None => inst.all_sources(),
    };
    let theta = resolve_theta(&inst, &args.true_theta)?;
    let seed = effective_seed(args.seed)?;
    let run = simulate_run(&inst, &subset, theta, args.horizon, seed, args.epsilon)?;

    let complexity = if subset.is_empty() || run.equivalence_class.len() == inst.m() {
        None
    } else {
        match SampleComplexity::for_subset(&inst, &subset, args.delta, run.epsilon, args.mu_th) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("sample complexity unavailable: {e}");
                None
            }
        }
    };
    let violations: usize = run.steps.iter().map(|s| s.bound_violations.len()).sum();
    let max_gap = run
        .steps
        .iter()
        .map(|s| s.max_gap_in_class)
        .fold(0.0, f64::max);
    let diagnostics = json!({
        "true_theta": theta,
        "subset": run.subset,
        "seed": seed,
        "horizon": run.horizon(),
        "epsilon": run.epsilon,
        "equivalence_class": run.equivalence_class,
        "kl": run.kl,
        "log_ratio_bound": run.log_ratio_bound,
        "sample_complexity": complexity,
        "epsilon_not_below_kl": run.epsilon_not_below_kl,
        "max_gap_in_class": max_gap,
        "bound_violations": violations,
        "final_beliefs": run.final_beliefs(),
        "steps": run.steps,
    });

    let mut out = open_output(args.output.as_deref())?;
    run.write_csv(&inst, &mut out)?;
    out.flush()?;
    match &args.diagnostics {
        Some(p) => emit_json(&diagnostics, Some(p))?,
        None => eprintln!("{diagnostics}"),
    }
    Ok(0)
}

fn cmd_experiment(args: &ExperimentArgs, threads: Option<usize>) -> CliResult<u8> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.spec.display())))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed experiment spec: {e}")))?;
    spec.master_seed = effective_seed(args.seed.unwrap_or(spec.master_seed))?;
    spec.resolve()
        .map_err(|e| CliError::usage(format!("malformed experiment spec: {e}")))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let output = pool.install(|| run_experiment(&spec))?;

    let mut out = open_output(args.output.as_deref())?;
    output.write_csv(&mut out)?;
    out.flush()?;
    let summary_path = args.summary.clone().or_else(|| {
        args.output
            .as_ref()
            .map(|p| p.with_extension("summary.json"))
    });
    match summary_path {
        Some(p) => emit_json(&output.summary, Some(&p))?,
        None => eprintln!("{}", output.summary_json()),
    }
    if output.summary.all_certificates_pass {
        Ok(0)
    } else {
        eprintln!("some certificates failed");
        Ok(1)
    }
}
