//! `vqpd`: solve, compare and verify constrained convex programs.
//!
//! Exit codes: 0 success, 1 failed checks or I/O error, 2 non-finite value
//! during a run, 3 configuration error, 4 missing reference solution.

mod compare;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;
use vqpd::instances::InstanceDescriptor;
use vqpd::oracle::{long_run_reference, ReferenceMethod, ReferenceSolution};
use vqpd::solvers::{run_with_reference, Algorithm, CheckSummary, SolverRun};
use vqpd::trace::{write_trace_file, RunSummary};

use crate::compare::Compared;
use crate::config::RunConfig;

const DEFAULT_OUT_DIR: &str = "vqpd-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    NonFinite(vqpd::Error),
    #[error("missing reference: {0}")]
    MissingReference(String),
    #[error("{0} check violation(s)")]
    ChecksFailed(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Library(vqpd::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) | CliError::Io(_) | CliError::Library(_) => 1,
            CliError::NonFinite(_) => 2,
            CliError::Config(_) => 3,
            CliError::MissingReference(_) => 4,
        }
    }
}

impl From<vqpd::Error> for CliError {
    fn from(e: vqpd::Error) -> Self {
        use vqpd::Error as E;
        match e {
            E::NonFinite { .. } => CliError::NonFinite(e),
            E::Io(io) => CliError::Io(io),
            E::Dimension { .. }
            | E::InvalidProblem(_)
            | E::InvalidArgument(_)
            | E::MissingConstant(_)
            | E::NonConvex { .. }
            | E::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Library(other),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vqpd",
    version,
    about = "Virtual-queue primal-dual solvers for constrained convex programs"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "VQPD_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its trace and summary.
    Solve {
        /// Run config (TOML); flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run several algorithms on one instance and align their traces.
    Compare {
        /// Run configs; repeat for each run.
        #[arg(long)]
        config: Vec<PathBuf>,
        /// Algorithms to add as runs on the instance given by flags.
        #[arg(long)]
        algorithm: Vec<Algorithm>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run with every runtime check enabled against a reference solution.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Algorithms to verify; defaults to new-constant and new-adaptive.
        #[arg(long)]
        algorithm: Vec<Algorithm>,
        /// Reference solution (JSON) for instances without a closed form.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Compute a reference with this many new-adaptive iterations.
        #[arg(long)]
        long_run: Option<u64>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Export a generated instance as a TOML problem file.
    Gen {
        #[command(flatten)]
        instance: InstanceArgs,
        /// File stem; defaults to `<instance>-n<n>-s<seed>`.
        #[arg(long)]
        stem: Option<String>,
    },
}

#[derive(Args, Default)]
struct InstanceArgs {
    /// Generated instance: qp1, ball1, gmv-l2, gmv-l1 or lasso.
    #[arg(long, conflicts_with = "problem")]
    instance: Option<String>,
    /// TOML problem file.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Dimension of the generated instance.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Constraint level of the generated instance.
    #[arg(long)]
    b: Option<f64>,
    /// Keep the gmv-l1 budget as an equality row.
    #[arg(long)]
    equality: bool,
}

#[derive(Args, Default)]
struct SolverArgs {
    /// Constant proximal weight.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<u64>,
    /// Trace row every `stride` iterations.
    #[arg(long)]
    stride: Option<u64>,
    /// Run the invariant checks every iteration.
    #[arg(long)]
    diagnostics: bool,
    /// Record wall time in the trace (makes traces non-reproducible).
    #[arg(long)]
    wall_time: bool,
}

fn default_dimension(name: &str) -> usize {
    match name {
        "qp1" => 1,
        "ball1" => 3,
        "lasso" => 20,
        _ => 50,
    }
}

impl InstanceArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(name) = &self.instance {
            let n = self.n.unwrap_or_else(|| default_dimension(name));
            cfg.instance = Some(InstanceDescriptor::new(
                name.clone(),
                n,
                self.seed.unwrap_or(0),
            ));
            cfg.problem_file = None;
        } else if let Some(path) = &self.problem {
            cfg.problem_file = Some(path.clone());
            cfg.instance = None;
        }
        match &mut cfg.instance {
            Some(d) => {
                d.n = self.n.unwrap_or(d.n);
                d.seed = self.seed.unwrap_or(d.seed);
                d.b = self.b.or(d.b);
                d.equality |= self.equality;
            }
            None if self.n.is_some()
                || self.seed.is_some()
                || self.b.is_some()
                || self.equality =>
            {
                return Err(CliError::Config(
                    "--n, --seed, --b and --equality need a generated instance".into(),
                ));
            }
            None => {}
        }
        Ok(())
    }
}

impl SolverArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.solver;
        s.alpha = self.alpha.or(s.alpha);
        s.max_iters = self.iters.unwrap_or(s.max_iters);
        s.stride = self.stride.unwrap_or(s.stride);
        s.diagnostics |= self.diagnostics;
        s.record_wall_time |= self.wall_time;
    }
}

fn build_config(
    path: Option<&Path>,
    algorithm: Option<Algorithm>,
    instance: &InstanceArgs,
    solver: &SolverArgs,
) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(a) = algorithm {
        cfg.algorithm = a;
    }
    instance.apply(&mut cfg)?;
    solver.apply(&mut cfg);
    Ok(cfg)
}

fn out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Library(e.into()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs one config and writes `<stem>.trace.csv`, `<stem>.summary.json` and
/// the effective `<stem>.config.toml`.
fn execute(cfg: &RunConfig, dir: &Path) -> Result<(SolverRun, RunSummary, PathBuf), CliError> {
    let loaded = cfg.load()?;
    let run = run_with_reference(
        &loaded.problem,
        cfg.algorithm,
        &cfg.solver,
        loaded.reference.as_ref(),
    )?;
    let mut summary = RunSummary::from_run(&loaded.problem, &run);
    summary.instance = cfg.problem_name();
    std::fs::create_dir_all(dir)?;
    let stem = cfg.stem();
    let trace = dir.join(format!("{stem}.trace.csv"));
    write_trace_file(&trace, &run.trace)?;
    summary.write_json(&dir.join(format!("{stem}.summary.json")))?;
    std::fs::write(dir.join(format!("{stem}.config.toml")), cfg.to_toml()?)?;
    Ok((run, summary, trace))
}

fn cmd_solve(out: Option<&Path>, cfg: RunConfig) -> Result<(), CliError> {
    let dir = out_dir(out, &cfg);
    let (_, summary, trace) = execute(&cfg, &dir)?;
    println!("{}", summary.line());
    if let Some(d) = &summary.diagnostics {
        if !d.passed() {
            eprintln!(
                "warning: {} runtime check violation(s)",
                d.total_violations()
            );
        }
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("trace: {}", trace.display());
    Ok(())
}

fn cmd_compare(out: Option<&Path>, configs: Vec<RunConfig>) -> Result<(), CliError> {
    if configs.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs at least two runs, got {}",
            configs.len()
        )));
    }
    let key = configs[0].problem_key();
    if let Some(other) = configs.iter().find(|c| c.problem_key() != key) {
        return Err(CliError::Config(format!(
            "runs use different instances: {} and {}",
            configs[0].problem_name(),
            other.problem_name()
        )));
    }
    let dir = out_dir(out, &configs[0]);
    let mut stems: Vec<String> = configs.iter().map(RunConfig::stem).collect();
    for i in 0..stems.len() {
        if stems[..i].contains(&stems[i]) {
            stems[i] = format!("{}-{i}", stems[i]);
        }
    }
    let labels = compare::labels(
        &configs
            .iter()
            .zip(&stems)
            .map(|(c, s)| (c.algorithm, s.clone()))
            .collect::<Vec<_>>(),
    );
    // Runs execute one after another so their timings do not compete.
    let mut compared = Vec::new();
    for ((cfg, stem), label) in configs.iter().zip(stems).zip(labels) {
        let mut cfg = cfg.clone();
        cfg.output.stem = Some(stem);
        let (run, summary, _) = execute(&cfg, &dir)?;
        println!("{}", summary.line());
        compared.push(Compared {
            label,
            algorithm: cfg.algorithm,
            trace: run.trace,
            iteration_ns: run.iteration_ns,
            final_objective: summary.final_objective,
            final_max_violation: summary.final_max_violation,
        });
    }
    let name = configs[0].problem_name();
    let table = dir.join(format!("{name}-compare.csv"));
    compare::write_aligned(std::fs::File::create(&table)?, &compared)
        .map_err(|e| CliError::Library(e.into()))?;
    let summary = compare::summarize(&name, &compared);
    write_json(&dir.join(format!("{name}-compare.json")), &summary)?;
    println!(
        "{:<24} {:>14} {:>14} {:>10} {:>10}",
        "run", "mean ns/iter", "p50 ns/iter", "mean x", "p50 x"
    );
    for r in &summary.runs {
        println!(
            "{:<24} {:>14.0} {:>14.0} {:>10.2} {:>10.2}",
            r.label, r.mean_iteration_ns, r.median_iteration_ns, r.mean_ratio, r.p50_ratio
        );
    }
    println!(
        "speed-up relative to {}; table: {}",
        summary.baseline,
        table.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct VerifyRun {
    algorithm: Algorithm,
    iterations: u64,
    passed: bool,
    checks: Vec<CheckSummary>,
    skipped: Vec<(String, String)>,
}

#[derive(Serialize)]
struct VerifyReport {
    instance: String,
    reference_method: ReferenceMethod,
    f_star: f64,
    reference_tolerance: f64,
    lambda_confident: bool,
    passed: bool,
    runs: Vec<VerifyRun>,
}

fn load_reference(path: &Path) -> Result<ReferenceSolution, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingReference(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_verify(
    out: Option<&Path>,
    cfg: RunConfig,
    algorithms: Vec<Algorithm>,
    reference: Option<&Path>,
    long_run: Option<u64>,
) -> Result<(), CliError> {
    let loaded = cfg.load()?;
    let reference = match (reference, long_run, loaded.reference) {
        (Some(path), _, _) => load_reference(path)?,
        (None, Some(iters), _) => long_run_reference(&loaded.problem, iters)?,
        (None, None, Some(r)) => r,
        (None, None, None) => {
            return Err(CliError::MissingReference(format!(
                "{} has no closed-form reference; pass --reference or --long-run",
                cfg.problem_name()
            )))
        }
    };
    reference
        .validate(&loaded.problem)
        .map_err(|e| CliError::Config(format!("reference does not fit the problem: {e}")))?;
    let algorithms = if algorithms.is_empty() {
        vec![Algorithm::NewConstant, Algorithm::NewAdaptive]
    } else {
        algorithms
    };
    let mut solver = cfg.solver.clone();
    solver.diagnostics = true;
    let mut runs = Vec::new();
    for algorithm in algorithms {
        let run = run_with_reference(&loaded.problem, algorithm, &solver, Some(&reference))?;
        let report = run.diagnostics.unwrap_or_default();
        runs.push(VerifyRun {
            algorithm,
            iterations: run.iterations,
            passed: report.passed(),
            checks: report.checks,
            skipped: report.skipped,
        });
    }
    let violations: u64 = runs
        .iter()
        .flat_map(|r| &r.checks)
        .map(|c| c.violations)
        .sum();
    let report = VerifyReport {
        instance: cfg.problem_name(),
        reference_method: reference.method,
        f_star: reference.f_star,
        reference_tolerance: reference.tolerance,
        lambda_confident: reference.lambda_confident,
        passed: violations == 0,
        runs,
    };
    for run in &report.runs {
        for c in &run.checks {
            println!(
                "{:<14} {:<40} trials={:<8} violations={:<6} worst_slack={}",
                run.algorithm,
                c.name,
                c.trials,
                c.violations,
                c.worst_slack.map_or("-".into(), |s| format!("{s:.3e}"))
            );
        }
        for (name, reason) in &run.skipped {
            println!("{:<14} {name:<40} skipped: {reason}", run.algorithm);
        }
    }
    let dir = out_dir(out, &cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}-verify.json", cfg.problem_name()));
    write_json(&path, &report)?;
    println!("report: {}", path.display());
    if violations > 0 {
        return Err(CliError::ChecksFailed(violations));
    }
    Ok(())
}

fn cmd_gen(out: Option<&Path>, args: &InstanceArgs, stem: Option<String>) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    args.apply(&mut cfg)?;
    let descriptor = cfg
        .instance
        .clone()
        .ok_or_else(|| CliError::Config("gen needs --instance".into()))?;
    let instance = descriptor.build()?;
    let stem = stem
        .unwrap_or_else(|| format!("{}-n{}-s{}", descriptor.name, descriptor.n, descriptor.seed));
    let dir = out_dir(out, &cfg);
    let mut written = instance.export(&dir, &stem)?;
    if let Some(r) = &instance.reference {
        let path = dir.join(format!("{stem}.reference.json"));
        write_json(&path, r)?;
        written.push(path);
    }
    println!("{}: {}", descriptor.name, descriptor.note());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve {
            config,
            algorithm,
            instance,
            solver,
        } => cmd_solve(
            out,
            build_config(config.as_deref(), algorithm, &instance, &solver)?,
        ),
        Command::Compare {
            config,
            algorithm,
            instance,
            solver,
        } => {
            let mut configs = Vec::new();
            for path in &config {
                configs.push(build_config(Some(path), None, &instance, &solver)?);
            }
            for alg in algorithm {
                configs.push(build_config(None, Some(alg), &instance, &solver)?);
            }
            cmd_compare(out, configs)
        }
        Command::Verify {
            config,
            algorithm,
            reference,
            long_run,
            instance,
            solver,
        } => {
            let mut cfg = build_config(config.as_deref(), None, &instance, &solver)?;
            if config.is_none() && solver.iters.is_none() {
                cfg.solver.max_iters = 10_000;
            }
            cmd_verify(out, cfg, algorithm, reference.as_deref(), long_run)
        }
        Command::Gen { instance, stem } => cmd_gen(out, &instance, stem),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
