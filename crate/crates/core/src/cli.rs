//! Command-line front end. Every subcommand reads one JSON config file;
//! only the output directory, the seed and verbosity are flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::{self, GraphSpec, RateReport, RunConfig};
use crate::schedule::ScheduleKind;
use crate::spectral;
use crate::weights::{self, WeightScheme};

const SCHEMA: &str = r#"CONFIG FILES

run (and every entry of compare.runs, and sweep.base):
  {
    "graph": {"kind": "random", "n": 6, "extra_edge_prob": 0.3, "seed": 7}
           | {"kind": "cycle", "n": 4} | {"kind": "complete", "n": 4}
           | {"kind": "edge_list", "path": "g.txt"},       (1-based "receiver sender" lines)
    "algorithm": "ddgd" | "dgd_doubly" | "dgd_row" | "dgd_col" | "gradient_push",
    "epsilon": 0.3,                 optional, > 0; certified choice when absent
    "weights": {"kind": "uniform"} | {"kind": "lazy", "self_weight": 0.5},
    "schedule": {"kind": "inverse_sqrt" | "inverse" | "inverse_pow",
                 "scale": 0.05, "exponent": 0.75},       exponent: inverse_pow only
    "iterations": 20000,
    "problem": {"rows_per_agent": 3, "dim": 3, "noise_std": 0.1,
                "loss": "norm" | "squared", "heterogeneity": 0.0, "seed": 0},
    "problem_file": "p.txt",        optional, replaces generation
    "init": {"kind": "random", "scale": 1.0} | {"kind": "zero"},
    "seed": 0,                      initial-state seed
    "allow_uncertified": false,     run ddgd even if M fails certification
    "check_recursions": false,      verify sum recursions every step
    "radius_guard": 1e8             abort if any state leaves this box
  }

compare:  {"runs": [<run config>, ...]}          (same graph, weights, problem)
sweep:    {"base": <run config with a random graph>,
           "extra_edge_probs": [0.0, 0.3, 0.8], "threshold": 0.01}
spectra, certify-eps:
  {"graph": <graph>, "weights": <weights>, "epsilon": 0.7 (>= 0, optional),
   "power_iterations": 10000, "tolerance": 1e-8}

Unknown keys are rejected.

EXIT CODES
  0  success
  1  invalid input or configuration (the message names the key or index)
  2  numeric failure or failed certification"#;

#[derive(Debug, Parser)]
#[command(name = "ddgd", version, about = "Directed distributed gradient descent experiments", after_long_help = SCHEMA)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print progress and artifact paths to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON config file (see `--help` for the schema).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the initial-state seed of every run in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run independent experiments one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace, plot, config and rate report.
    Run(CommonArgs),
    /// Run several algorithms on one graph and problem.
    Compare(CommonArgs),
    /// Repeat a run over random graphs of increasing density.
    Sweep(CommonArgs),
    /// Spectrum, epsilon bound and decay of M^k for one graph.
    Spectra(CommonArgs),
    /// Certify epsilon (exit 2 if M lacks a simple unit eigenvalue).
    CertifyEps(CommonArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub runs: Vec<RunConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub extra_edge_probs: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_power_iterations() -> usize {
    10_000
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub graph: GraphSpec,
    #[serde(default)]
    pub weights: WeightScheme,
    /// May be 0 here, to inspect the unperturbed matrix.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_power_iterations")]
    pub power_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write(path: PathBuf, body: String, verbose: u8) -> Result<()> {
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    if verbose > 0 {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn short_hash(value: &impl Serialize) -> Result<String> {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(serde_json::to_string(value)?.as_bytes());
    Ok(digest[..6].iter().map(|b| format!("{b:02x}")).collect())
}

/// The rate report for runs with `alpha_k ~ k^(-1/2)`; other schedules get
/// an explicit not-applicable report.
pub fn rate_report(cfg: &RunConfig, trace: &harness::RunTrace) -> Result<RateReport> {
    let q_half = match cfg.schedule.kind {
        ScheduleKind::InverseSqrt => true,
        ScheduleKind::InversePow => cfg.schedule.exponent == Some(0.5),
        ScheduleKind::Inverse => false,
    };
    if q_half && cfg.iterations >= 16 {
        harness::rate_envelope(trace, &cfg.schedule)
    } else {
        Ok(RateReport::not_applicable())
    }
}

fn execution(args: &CommonArgs) -> Execution {
    if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run_one(args: &CommonArgs, verbose: u8) -> Result<String> {
    let mut cfg: RunConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let trace = harness::run(&cfg)?;
    let rate = rate_report(&cfg, &trace)?;
    let paths = harness::write_artifacts(&args.out, &cfg, &trace, &rate)?;
    if verbose > 0 {
        for p in [&paths.trace, &paths.plot, &paths.config, &paths.rate] {
            eprintln!("wrote {}", p.display());
        }
        for w in &trace.summary.warnings {
            eprintln!("warning: {w}");
        }
    }
    let last = trace.last();
    let mut out = format!(
        "run {}: {} iterations in {:.2}s\n  residual {:.3e}  consensus {:.3e}  |y| {:.3e}  gap {:.3e}\n  f* {:.6}  best gap {:.3e} at k = {}",
        trace.summary.run_id,
        trace.iterations(),
        trace.summary.wall_time_secs,
        last.residual,
        last.consensus_error,
        last.y_norm,
        last.objective_gap,
        trace.summary.f_star,
        trace.summary.f_m - trace.summary.f_star,
        trace.summary.best_k,
    );
    if let Some(eps) = trace.summary.epsilon {
        out.push_str(&format!("\n  epsilon {eps}"));
    }
    if let Some(ok) = rate.envelope_ok {
        out.push_str(&format!(
            "\n  ln K / sqrt K envelope: {}",
            if ok { "ok" } else { "violated" }
        ));
    }
    Ok(out)
}

fn run_compare(args: &CommonArgs, verbose: u8) -> Result<String> {
    let mut cfg: CompareConfig = read_json(&args.config)?;
    for (i, run) in cfg.runs.iter_mut().enumerate() {
        if let Some(seed) = args.seed {
            run.seed = seed;
        }
        run.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("runs[{i}].{key}"), message),
            other => other,
        })?;
    }
    let cmp = harness::compare(&cfg.runs, execution(args))?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (run, trace) in cfg.runs.iter().zip(&cmp.traces) {
        let rate = rate_report(run, trace)?;
        harness::write_artifacts(&args.out, run, trace, &rate)?;
    }
    let id = format!("compare-{}", short_hash(&cfg)?);
    write(args.out.join(format!("{id}.csv")), cmp.to_csv(), verbose)?;
    write(
        args.out.join(format!("{id}.json")),
        serde_json::to_string_pretty(&cmp)?,
        verbose,
    )?;
    let mut out = format!("{id}\n  algorithm        residual    consensus   gap");
    for r in &cmp.rows {
        out.push_str(&format!(
            "\n  {:<15}  {:.3e}  {:.3e}  {:.3e}",
            r.algorithm.name(),
            r.final_residual,
            r.final_consensus_error,
            r.final_objective_gap
        ));
    }
    for (name, ok) in &cmp.checks {
        out.push_str(&format!("\n  [{}] {name}", if *ok { "ok" } else { "no" }));
    }
    Ok(out)
}

fn run_sweep(args: &CommonArgs, verbose: u8) -> Result<String> {
    let mut cfg: SweepConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base.seed = seed;
    }
    cfg.base.validate().map_err(|e| match e {
        Error::Config { key, message } => Error::config(format!("base.{key}"), message),
        other => other,
    })?;
    if !(cfg.threshold > 0.0) {
        return Err(Error::config("threshold", "must be > 0"));
    }
    if let Some(i) = cfg
        .extra_edge_probs
        .iter()
        .position(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::config(
            format!("extra_edge_probs[{i}]"),
            "must lie in [0, 1]",
        ));
    }
    let table = harness::density_sweep(
        &cfg.base,
        &cfg.extra_edge_probs,
        cfg.threshold,
        execution(args),
    )?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let id = format!("sweep-{}", short_hash(&cfg)?);
    write(args.out.join(format!("{id}.csv")), table.to_csv(), verbose)?;
    write(
        args.out.join(format!("{id}.json")),
        serde_json::to_string_pretty(&table)?,
        verbose,
    )?;
    let mut out = format!("{id} (threshold {:e})", table.threshold);
    for r in &table.rows {
        let k = r
            .iterations_to_threshold
            .map_or("not reached".to_string(), |k| k.to_string());
        out.push_str(&format!(
            "\n  p = {:<5} edges {:<4} iterations {k}",
            r.extra_edge_prob, r.edges
        ));
    }
    out.push_str(&format!(
        "\n  trend {} ({} inversions)",
        if table.trend_ok { "ok" } else { "violated" },
        table.inversions
    ));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SpectraReport {
    agents: usize,
    edges: usize,
    epsilon: f64,
    epsilon_bound: Option<f64>,
    certificate: spectral::SpectralVerdict,
    gamma_hat: Option<f64>,
    gamma_const: Option<f64>,
    first_k_below_tol: Option<usize>,
}

struct Certified {
    graph: crate::Digraph,
    m: nalgebra::DMatrix<f64>,
    m0: nalgebra::DMatrix<f64>,
    eps: f64,
    verdict: spectral::SpectralVerdict,
}

/// Resolves graph, weights and epsilon. Bad input is an error; a negative
/// verdict is not.
fn certify_from(cfg: &SpectraConfig) -> Result<Certified> {
    if let Some(eps) = cfg.epsilon {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::config("epsilon", format!("must be >= 0, got {eps}")));
        }
    }
    let graph = cfg.graph.build()?;
    let (a, b) = cfg.weights.build(&graph)?;
    let (eps, verdict) = match cfg.epsilon {
        Some(eps) => (eps, spectral::certify(&weights::assemble_m(&a, &b, eps)?)?),
        None => weights::select_epsilon(&a, &b, &weights::DEFAULT_EPSILON_CANDIDATES)?,
    };
    Ok(Certified {
        m: weights::assemble_m(&a, &b, eps)?,
        m0: weights::assemble_m(&a, &b, 0.0)?,
        graph,
        eps,
        verdict,
    })
}

fn run_spectra(args: &CommonArgs, verbose: u8) -> Result<String> {
    let cfg: SpectraConfig = read_json(&args.config)?;
    if !(cfg.tolerance > 0.0) {
        return Err(Error::config("tolerance", "must be > 0"));
    }
    let Certified {
        graph: g,
        m,
        m0,
        eps,
        verdict,
    } = certify_from(&cfg)?;
    let n = g.node_count();
    let bound = if n >= 2 {
        Some(weights::epsilon_bound(&m0)?)
    } else {
        None
    };
    let fit = if verdict.unit_eigenvalue_simple {
        Some(spectral::power_convergence(
            &m,
            cfg.power_iterations,
            cfg.tolerance,
        )?)
    } else {
        None
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let id = format!("spectra-{}", short_hash(&cfg)?);
    write(
        args.out.join(format!("{id}.m.csv")),
        weights::matrix_to_csv(&m),
        verbose,
    )?;
    if let Some(f) = &fit {
        write(
            args.out.join(format!("{id}.decay.csv")),
            f.distances_csv(),
            verbose,
        )?;
    }
    let report = SpectraReport {
        agents: n,
        edges: g.edge_count(),
        epsilon: eps,
        epsilon_bound: bound,
        certificate: verdict.clone(),
        gamma_hat: fit.as_ref().map(|f| f.gamma_hat),
        gamma_const: fit.as_ref().map(|f| f.gamma_const),
        first_k_below_tol: fit.as_ref().and_then(|f| f.first_k_below_tol),
    };
    write(
        args.out.join(format!("{id}.json")),
        serde_json::to_string_pretty(&report)?,
        verbose,
    )?;
    let mut out = format!(
        "{id}: n = {n}, epsilon = {eps}\n  simple unit eigenvalue: {}\n  |lambda_2| = {:.6}  margin = {:.3e}",
        verdict.unit_eigenvalue_simple, verdict.second_magnitude, verdict.margin
    );
    if let Some(bound) = bound {
        out.push_str(&format!("\n  sufficient epsilon bound = {bound:.3e}"));
    }
    if let Some(f) = &fit {
        out.push_str(&format!(
            "\n  ||M^k - L|| ~ {:.3} * {:.6}^k, below {:e} at k = {}",
            f.gamma_const,
            f.gamma_hat,
            cfg.tolerance,
            f.first_k_below_tol
                .map_or("never".to_string(), |k| k.to_string())
        ));
    }
    Ok(out)
}

fn run_certify(args: &CommonArgs) -> Result<String> {
    let cfg: SpectraConfig = read_json(&args.config)?;
    let Certified { eps, verdict, .. } = certify_from(&cfg)?;
    if !verdict.unit_eigenvalue_simple {
        return Err(Error::Certification(format!(
            "epsilon = {eps}: unit eigenvalue is not simple or |lambda_2| = {} is not below 1",
            verdict.second_magnitude
        )));
    }
    Ok(format!(
        "epsilon = {eps} certified: |lambda_2| = {:.6}, margin {:.3e}",
        verdict.second_magnitude, verdict.margin
    ))
}

/// Executes a parsed command and returns its human-readable summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let v = cli.verbose;
    match &cli.command {
        Command::Run(args) => run_one(args, v),
        Command::Compare(args) => run_compare(args, v),
        Command::Sweep(args) => run_sweep(args, v),
        Command::Spectra(args) => run_spectra(args, v),
        Command::CertifyEps(args) => run_certify(args),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        2
    } else {
        1
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
