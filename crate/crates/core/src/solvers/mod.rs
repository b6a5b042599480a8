//! Iterative solvers sharing one driver loop:
//!
//! * `new-constant` / `new-adaptive`: the linearised virtual-queue method,
//!   one closed-form coordinate pass per iteration, with a constant or a
//!   non-decreasing proximal weight;
//! * `yu-neely`: the same queue dynamics with an exact proximal subproblem
//!   solved by an inner accelerated method;
//! * `pd-subgradient`: projected primal-dual subgradient steps with clipped
//!   multipliers.
//!
//! The configured start point is `x(−1)`. The running average after `t`
//! iterations is the mean of the `t` produced iterates.

mod alpha;
pub mod diagnostics;
mod inner;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use alpha::{
    alpha_required, alpha_threshold, compute_alpha_max, default_constant_alpha, AlphaMode,
    AlphaRule, DEFAULT_ALPHA_INFLATION,
};
pub use diagnostics::{names as check_names, CheckSummary, DiagnosticsReport};
pub use inner::{solve_subproblem, subproblem_objective, InnerOutcome, InnerSolverConfig};

use crate::error::{check_len, Error, Result};
use crate::kernels;
use crate::linalg;
use crate::oracle::{ReferenceMethod, ReferenceSolution};
use crate::problem::Problem;
use crate::queue::{self, QueueState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    NewConstant,
    NewAdaptive,
    YuNeely,
    PdSubgradient,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::NewConstant,
        Algorithm::NewAdaptive,
        Algorithm::YuNeely,
        Algorithm::PdSubgradient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::NewConstant => "new-constant",
            Algorithm::NewAdaptive => "new-adaptive",
            Algorithm::YuNeely => "yu-neely",
            Algorithm::PdSubgradient => "pd-subgradient",
        }
    }

    fn uses_queue(self) -> bool {
        self != Algorithm::PdSubgradient
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

/// Early stop when `|F(x̄(t)) − F(x̄(t/2))| ≤ objective` and the max
/// violation of `x̄(t)` is `≤ violation`, checked at trace rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetGap {
    pub objective: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: u64,
    /// Trace rows are written at `t = 0` and every `stride` iterations.
    pub stride: u64,
    /// Constant proximal weight (`new-constant`, `yu-neely`).
    pub alpha: Option<f64>,
    /// Start point `x(−1)`; defaults to the projection of the origin.
    pub start: Option<Vec<f64>>,
    pub diagnostics: bool,
    /// Fill the trace's wall-time column. Off by default so traces are
    /// byte-reproducible.
    pub record_wall_time: bool,
    pub target: Option<TargetGap>,
    pub inner: InnerSolverConfig,
    /// Step size of `pd-subgradient`; defaults to `1/√max_iters`.
    pub step_size: Option<f64>,
    /// Multiplier cap of `pd-subgradient`.
    pub lambda_max: Option<f64>,
    /// Initial multipliers of `pd-subgradient`; zero by default.
    pub lambda_start: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            stride: 1,
            alpha: None,
            start: None,
            diagnostics: false,
            record_wall_time: false,
            target: None,
            inner: InnerSolverConfig::default(),
            step_size: None,
            lambda_max: None,
            lambda_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    MaxIters,
    TargetGapMet,
}

/// One trace row. Row `t = 0` describes the start; row `t ≥ 1` the state
/// after `t` iterations (`x(t−1)`, `x̄(t)`, `Q(t)`, the weight and drift of
/// the last iteration). For `pd-subgradient` the queue columns describe the
/// multipliers and `alpha_t` holds the step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u64,
    #[serde(rename = "F_x")]
    pub f_x: f64,
    #[serde(rename = "F_xbar")]
    pub f_xbar: f64,
    pub max_violation_xbar: f64,
    pub queue_norm: f64,
    pub alpha_t: f64,
    pub drift: f64,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub algorithm: Algorithm,
    pub x_start: Vec<f64>,
    /// Latest iterate.
    pub x: Vec<f64>,
    /// Iterate before `x`.
    pub x_prev: Vec<f64>,
    pub x_bar: Vec<f64>,
    /// `G(x)`
    pub g_x: Vec<f64>,
    /// `G(x_prev)`
    pub g_prev: Vec<f64>,
    /// Virtual queues, or the multipliers for `pd-subgradient`.
    pub queue: QueueState,
    /// Queue before the latest update.
    pub q_prev: Vec<f64>,
    /// Multipliers used by the latest primal update.
    pub weights: Vec<f64>,
    pub alpha: AlphaRule,
    pub step_size: f64,
    pub lambda_max: f64,
    pub trace: Vec<IterationRecord>,
    pub status: Status,
    pub iterations: u64,
    pub warnings: Vec<String>,
    /// Wall time of each iteration.
    pub iteration_ns: Vec<u64>,
    pub inner_iterations: u64,
    pub inner_failures: u64,
    pub diagnostics: Option<DiagnosticsReport>,
    equality_mask: Vec<bool>,
    d: Vec<f64>,
    scratch: Vec<f64>,
}

impl SolverRun {
    /// Initial state: `x(−1)`, `Q(0)`, and the first weight.
    pub fn new(
        problem: &Problem,
        algorithm: Algorithm,
        config: &SolverConfig,
        reference: Option<&ReferenceSolution>,
    ) -> Result<Self> {
        let n = problem.dim();
        let m = problem.num_constraints();
        let x_start = match &config.start {
            Some(s) => {
                check_len("start point", n, s.len())?;
                if !problem.bounds().contains(s) {
                    return Err(Error::InvalidArgument(
                        "start point lies outside the box".into(),
                    ));
                }
                s.clone()
            }
            None => problem.project(&vec![0.0; n]),
        };
        let g_x = problem.eval_g(&x_start)?;
        if g_x.iter().any(|v| !v.is_finite()) || x_start.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: 0,
                context: "constraint values at the start point".into(),
            });
        }
        let equality_mask = problem.equality_mask();
        let mut queue = queue::init_queue_masked(&g_x, &equality_mask);
        let weights = queue.multipliers(&g_x);

        let mut step_size = 0.0;
        let mut lambda_max = 0.0;
        let alpha = match algorithm {
            Algorithm::NewConstant => AlphaRule::constant(problem, config.alpha)?,
            Algorithm::NewAdaptive => {
                if config.alpha.is_some() {
                    return Err(Error::InvalidArgument(
                        "new-adaptive chooses its own alpha; drop the alpha setting".into(),
                    ));
                }
                AlphaRule::adaptive(problem, &weights)
            }
            Algorithm::YuNeely => {
                let a = config
                    .alpha
                    .unwrap_or_else(|| default_constant_alpha(problem));
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "alpha must be positive, got {a}"
                    )));
                }
                AlphaRule {
                    mode: AlphaMode::Constant,
                    alpha_const: Some(a),
                    current: a,
                    alpha_max_diag: None,
                }
            }
            Algorithm::PdSubgradient => {
                step_size = config
                    .step_size
                    .unwrap_or(1.0 / (config.max_iters.max(1) as f64).sqrt());
                if !(step_size > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "step size must be positive, got {step_size}"
                    )));
                }
                lambda_max = match (config.lambda_max, reference) {
                    (Some(v), _) => v,
                    (None, Some(r)) if r.lambda_confident => {
                        10.0 * (linalg::norm(&r.lambda_star) + 1.0)
                    }
                    _ => 10.0,
                };
                if !(lambda_max > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "lambda_max must be positive, got {lambda_max}"
                    )));
                }
                let lambda = match &config.lambda_start {
                    Some(l) => {
                        check_len("lambda start", m, l.len())?;
                        l.clone()
                    }
                    None => vec![0.0; m],
                };
                queue = queue::init_queue_masked(&vec![0.0; m], &equality_mask);
                queue.lyapunov = 0.5 * linalg::norm_sq(&lambda);
                queue.q = lambda;
                AlphaRule {
                    mode: AlphaMode::Constant,
                    alpha_const: None,
                    current: step_size,
                    alpha_max_diag: None,
                }
            }
        };

        Ok(Self {
            algorithm,
            x: x_start.clone(),
            x_prev: x_start.clone(),
            x_bar: x_start.clone(),
            x_start,
            g_prev: g_x.clone(),
            g_x,
            q_prev: queue.q.clone(),
            queue,
            weights,
            alpha,
            step_size,
            lambda_max,
            trace: Vec::new(),
            status: Status::Running,
            iterations: 0,
            warnings: Vec::new(),
            iteration_ns: Vec::new(),
            inner_iterations: 0,
            inner_failures: 0,
            diagnostics: None,
            equality_mask,
            d: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn equality_mask(&self) -> &[bool] {
        &self.equality_mask
    }

    /// Current trace row, computed from the run state.
    pub fn record(&self, problem: &Problem, wall_time_ns: u64) -> Result<IterationRecord> {
        let rec = IterationRecord {
            t: self.iterations,
            f_x: problem.objective_value(&self.x),
            f_xbar: problem.objective_value(&self.x_bar),
            max_violation_xbar: problem.max_violation(&self.x_bar),
            queue_norm: self.queue.norm(),
            alpha_t: self.alpha.current,
            drift: self.queue.last_drift,
            wall_time_ns,
        };
        let finite = [
            rec.f_x,
            rec.f_xbar,
            rec.max_violation_xbar,
            rec.queue_norm,
            rec.alpha_t,
            rec.drift,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                iteration: self.iterations,
                context: format!("trace row {rec:?}"),
            });
        }
        Ok(rec)
    }

    pub fn mean_iteration_ns(&self) -> f64 {
        if self.iteration_ns.is_empty() {
            0.0
        } else {
            self.iteration_ns.iter().map(|&v| v as f64).sum::<f64>()
                / self.iteration_ns.len() as f64
        }
    }

    /// Evaluates `G` at the new iterate, then updates the queue and the
    /// running average.
    fn finish_step(&mut self, problem: &Problem) -> Result<()> {
        let t = self.iterations;
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: t,
                context: format!("iterate coordinate {i} is {}", self.x[i]),
            });
        }
        std::mem::swap(&mut self.g_prev, &mut self.g_x);
        problem.eval_g_into(&self.x, &mut self.g_x);
        if let Some(k) = self.g_x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: t,
                context: format!("constraint {k} evaluates to {}", self.g_x[k]),
            });
        }
        self.q_prev.copy_from_slice(&self.queue.q);
        self.queue.update(&self.g_x, &self.equality_mask)?;
        self.update_average();
        Ok(())
    }

    fn update_average(&mut self) {
        let k = self.iterations as f64;
        let (keep, add) = (k / (k + 1.0), 1.0 / (k + 1.0));
        for (b, v) in self.x_bar.iter_mut().zip(&self.x) {
            *b = *b * keep + v * add;
        }
        self.iterations += 1;
    }

    fn check_finite_direction(&self) -> Result<()> {
        match self.d.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                iteration: self.iterations,
                context: format!("gradient coordinate {i} is {}", self.d[i]),
            }),
            None => Ok(()),
        }
    }
}

/// One iteration of the linearised virtual-queue method.
pub fn new_alg_step(problem: &Problem, run: &mut SolverRun) -> Result<()> {
    for (w, (q, g)) in run.weights.iter_mut().zip(run.queue.q.iter().zip(&run.g_x)) {
        *w = q + g;
    }
    let alpha = run.alpha.advance(problem, &run.weights);
    kernels::linear_coefficients(problem, &run.x, &run.weights, &mut run.d, &mut run.scratch);
    run.check_finite_direction()?;
    std::mem::swap(&mut run.x_prev, &mut run.x);
    kernels::coordinate_update(
        problem,
        &run.x_prev,
        &run.d,
        &run.weights,
        alpha,
        &mut run.x,
    )?;
    run.finish_step(problem)
}

/// One iteration of the exact-subproblem baseline.
pub fn yu_neely_step(
    problem: &Problem,
    run: &mut SolverRun,
    inner: &InnerSolverConfig,
) -> Result<()> {
    for (w, (q, g)) in run.weights.iter_mut().zip(run.queue.q.iter().zip(&run.g_x)) {
        *w = q + g;
    }
    let alpha = run.alpha.current;
    let out = inner::solve_subproblem(problem, &run.x, &run.weights, alpha, inner)?;
    run.inner_iterations += out.iterations as u64;
    if !out.converged {
        run.inner_failures += 1;
        if run.inner_failures == 1 {
            run.warnings.push(format!(
                "inner solver stopped after {} iterations without reaching tolerance {} at iteration {}; \
                 using its best iterate",
                out.iterations, inner.tolerance, run.iterations
            ));
        }
    }
    if !out.objective.is_finite() {
        return Err(Error::NonFinite {
            iteration: run.iterations,
            context: "inner subproblem objective".into(),
        });
    }
    std::mem::swap(&mut run.x_prev, &mut run.x);
    run.x.copy_from_slice(&out.x);
    run.finish_step(problem)
}

/// One projected primal-dual subgradient iteration. Multipliers of
/// inequality rows stay in `[0, λ_max]`; equality rows in `[−λ_max, λ_max]`.
pub fn pd_subgradient_step(problem: &Problem, run: &mut SolverRun) -> Result<()> {
    let c = run.step_size;
    let lambda = run.queue.q.clone();
    kernels::linear_coefficients(problem, &run.x, &lambda, &mut run.d, &mut run.scratch);
    let obj_sep = problem.objective_separable();
    for i in 0..run.d.len() {
        let v = run.x[i];
        let mut s = obj_sep.coord_subgradient(i, v);
        for (con, &l) in problem.constraints().iter().zip(&lambda) {
            if l != 0.0 && !con.separable.is_zero() {
                s += l * con.separable.coord_subgradient(i, v);
            }
        }
        run.d[i] += s;
    }
    run.check_finite_direction()?;
    run.weights.copy_from_slice(&lambda);
    std::mem::swap(&mut run.x_prev, &mut run.x);
    let bounds = problem.bounds();
    for i in 0..run.x.len() {
        run.x[i] = bounds.clamp(i, run.x_prev[i] - c * run.d[i]);
    }
    if let Some(i) = run.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: run.iterations,
            context: format!("iterate coordinate {i} is {}", run.x[i]),
        });
    }
    let lmax = run.lambda_max;
    for (k, l) in run.queue.q.iter_mut().enumerate() {
        let lo = if run.equality_mask[k] { -lmax } else { 0.0 };
        *l = (*l + c * run.g_x[k]).clamp(lo, lmax);
    }
    std::mem::swap(&mut run.g_prev, &mut run.g_x);
    problem.eval_g_into(&run.x, &mut run.g_x);
    if let Some(k) = run.g_x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: run.iterations,
            context: format!("constraint {k} evaluates to {}", run.g_x[k]),
        });
    }
    run.q_prev.copy_from_slice(&lambda);
    let before = run.queue.lyapunov;
    run.queue.lyapunov = 0.5 * linalg::norm_sq(&run.queue.q);
    run.queue.last_drift = run.queue.lyapunov - before;
    run.queue.t += 1;
    run.update_average();
    Ok(())
}

/// Runs `algorithm` without a reference solution.
pub fn run(problem: &Problem, algorithm: Algorithm, config: &SolverConfig) -> Result<SolverRun> {
    run_with_reference(problem, algorithm, config, None)
}

/// Runs `algorithm`. With `config.diagnostics`, every iteration is checked
/// against the queue, drift and step-size invariants, plus the rate bounds
/// when a reference solution is supplied.
pub fn run_with_reference(
    problem: &Problem,
    algorithm: Algorithm,
    config: &SolverConfig,
    reference: Option<&ReferenceSolution>,
) -> Result<SolverRun> {
    if config.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "max_iters must be at least 1".into(),
        ));
    }
    if config.stride == 0 {
        return Err(Error::InvalidArgument(
            "trace stride must be at least 1".into(),
        ));
    }
    if let Some(r) = reference {
        check_len("reference x*", problem.dim(), r.x_star.len())?;
        check_len(
            "reference lambda*",
            problem.num_constraints(),
            r.lambda_star.len(),
        )?;
    }
    let mut run = SolverRun::new(problem, algorithm, config, reference)?;
    let mut monitor = if config.diagnostics {
        Some(Monitor::new(problem, &mut run, reference))
    } else {
        None
    };
    run.trace.push(run.record(problem, 0)?);
    run.iteration_ns
        .reserve(config.max_iters.min(1 << 22) as usize);
    let mut elapsed: u64 = 0;

    for _ in 0..config.max_iters {
        let started = Instant::now();
        match algorithm {
            Algorithm::NewConstant | Algorithm::NewAdaptive => new_alg_step(problem, &mut run)?,
            Algorithm::YuNeely => yu_neely_step(problem, &mut run, &config.inner)?,
            Algorithm::PdSubgradient => pd_subgradient_step(problem, &mut run)?,
        }
        let ns = started.elapsed().as_nanos() as u64;
        run.iteration_ns.push(ns);
        elapsed += ns;
        if let Some(m) = monitor.as_mut() {
            m.observe(problem, &run)?;
        }
        let t = run.iterations;
        if t % config.stride == 0 || t == config.max_iters {
            let rec = run.record(problem, if config.record_wall_time { elapsed } else { 0 })?;
            run.trace.push(rec);
            if let Some(target) = config.target {
                if target_met(&run.trace, target) {
                    run.status = Status::TargetGapMet;
                    break;
                }
            }
        }
    }
    if run.status == Status::Running {
        run.status = Status::MaxIters;
    }
    if run.inner_failures > 1 {
        run.warnings.push(format!(
            "inner solver missed its tolerance in {} of {} iterations",
            run.inner_failures, run.iterations
        ));
    }
    run.diagnostics = monitor.map(|m| m.report);
    Ok(run)
}

fn target_met(trace: &[IterationRecord], target: TargetGap) -> bool {
    let last = match trace.last() {
        Some(r) if r.t >= 2 => r,
        _ => return false,
    };
    let half = last.t / 2;
    let earlier = trace.iter().rev().find(|r| r.t <= half && r.t >= 1);
    match earlier {
        Some(e) => {
            (last.f_xbar - e.f_xbar).abs() <= target.objective
                && last.max_violation_xbar <= target.violation
        }
        None => false,
    }
}

/// Rate-bound constants: `F(x̄(t)) − F* ≤ objective / t` and
/// `G_k(x̄(t)) ≤ violation / t`.
#[derive(Debug, Clone, Copy)]
struct RateBounds {
    objective: f64,
    violation: f64,
    slack: f64,
}

/// Per-iteration invariant checks.
struct Monitor {
    report: DiagnosticsReport,
    x_star: Option<Vec<f64>>,
    f_at_star: f64,
    g_at_star: Vec<f64>,
    f_star: f64,
    lambda_norm: Option<f64>,
    alpha_max: Option<f64>,
    rates: Option<RateBounds>,
    sum_x: Vec<f64>,
    alpha_before: f64,
    check_smooth_step: bool,
}

impl Monitor {
    fn new(problem: &Problem, run: &mut SolverRun, reference: Option<&ReferenceSolution>) -> Self {
        use diagnostics::names::*;
        let mut report = DiagnosticsReport::default();
        let alg = run.algorithm;
        let mask = run.equality_mask.clone();
        let has_eq = mask.iter().any(|&e| e);
        let consts = *problem.constants();

        if alg.uses_queue() {
            let slack = queue::norm_dominance_slack(&run.g_x, &run.queue.q, &mask);
            report.record(INITIAL_QUEUE_NORM, 0, slack);
        }

        let lambda_norm = reference
            .filter(|r| r.lambda_confident)
            .map(|r| linalg::norm(&r.lambda_star));
        let mut alpha_max = None;
        if alg == Algorithm::NewAdaptive {
            match lambda_norm {
                Some(l) => match compute_alpha_max(problem, l) {
                    Ok(v) => alpha_max = Some(v),
                    Err(e) => report.skip(ALPHA_BELOW_CAP, e.to_string()),
                },
                None => report.skip(ALPHA_BELOW_CAP, "no confident multiplier reference"),
            }
            run.alpha.alpha_max_diag = alpha_max;
        }

        let (x_star, f_at_star, g_at_star, f_star) = match reference {
            Some(r) => {
                let g = problem.eval_g(&r.x_star).unwrap_or_default();
                (
                    Some(r.x_star.clone()),
                    problem.objective_value(&r.x_star),
                    g,
                    r.f_star,
                )
            }
            None => {
                report.skip(DPP_BOUND, "no reference solution");
                (None, 0.0, Vec::new(), 0.0)
            }
        };

        let ref_slack = match reference {
            Some(r) if r.method != ReferenceMethod::Analytic => r.tolerance,
            _ => 0.0,
        };
        let rates = match (alg, reference, lambda_norm) {
            _ if has_eq => {
                report.skip(OBJECTIVE_RATE, "equality-masked rows");
                None
            }
            (Algorithm::NewConstant, Some(r), Some(l)) if problem.linear_constraints() => {
                let a = run.alpha.current;
                let dist = linalg::dist(&r.x_star, &run.x_start);
                let beta = consts.beta;
                let denom = a - 0.5 * beta * beta - 0.5 * problem.l_f();
                Some(RateBounds {
                    objective: a * dist * dist,
                    violation: 2.0 * l
                        + (2.0 * a).sqrt() * dist
                        + (a / denom).sqrt() * linalg::norm(&g_at_star),
                    slack: ref_slack,
                })
            }
            (Algorithm::NewAdaptive, Some(_), Some(l)) => {
                match (alpha_max, consts.c_bound, consts.radius) {
                    (Some(am), Some(c), Some(r)) => Some(RateBounds {
                        objective: am * r * r,
                        violation: 2.0 * l + r * (2.0 * am).sqrt() + c,
                        slack: ref_slack,
                    }),
                    _ => {
                        report.skip(OBJECTIVE_RATE, "needs C, R and the weight cap");
                        None
                    }
                }
            }
            (Algorithm::NewConstant | Algorithm::NewAdaptive, _, _) => {
                report.skip(OBJECTIVE_RATE, "needs a reference with confident multipliers (and linear constraints for a constant weight)");
                None
            }
            _ => None,
        };
        if rates.is_none() {
            report.skip(VIOLATION_RATE, "rate bound not applicable");
        }

        let check_smooth_step = matches!(alg, Algorithm::NewConstant | Algorithm::NewAdaptive)
            && problem.is_smooth()
            && !has_eq;

        Self {
            report,
            x_star,
            f_at_star,
            g_at_star,
            f_star,
            lambda_norm,
            alpha_max,
            rates,
            sum_x: vec![0.0; problem.dim()],
            alpha_before: run.alpha.current,
            check_smooth_step,
        }
    }

    fn observe(&mut self, problem: &Problem, run: &SolverRun) -> Result<()> {
        use diagnostics::names::*;
        let t = run.iterations - 1;
        let mask = &run.equality_mask;
        let r = &mut self.report;

        // box and running average
        let bounds = problem.bounds();
        let box_slack = run
            .x
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - bounds.lower()[i]).min(bounds.upper()[i] - v))
            .fold(f64::INFINITY, f64::min);
        r.record(ITERATE_IN_BOX, t, box_slack);
        linalg::axpy(1.0, &run.x, &mut self.sum_x);
        let count = run.iterations as f64;
        let avg_err = run
            .x_bar
            .iter()
            .zip(&self.sum_x)
            .map(|(b, s)| (b - s / count).abs())
            .fold(0.0, f64::max);
        r.record_tol(RUNNING_AVERAGE, t, -avg_err, 1e-10 * count);

        if !run.algorithm.uses_queue() {
            return Ok(());
        }

        let has_inequality = mask.iter().any(|&e| !e);
        if has_inequality {
            r.record(QUEUE_NONNEGATIVE, t, queue::min_queue(&run.queue.q, mask));
            r.record(
                MULTIPLIER_NONNEGATIVE,
                t,
                queue::min_multiplier(&run.q_prev, &run.g_prev, mask),
            );
            r.record(
                QUEUE_NORM_DOMINATES,
                t,
                queue::norm_dominance_slack(&run.queue.q, &run.g_x, mask),
            );
        }
        if !run.queue.is_empty() {
            r.record(
                QUEUE_DOMINATES_CUMULATIVE,
                t,
                queue::min_cumulative_slack(&run.queue),
            );
        }
        let drift = run.queue.last_drift;
        let drift_bound = linalg::dot(&run.q_prev, &run.g_x) + linalg::norm_sq(&run.g_x);
        r.record(DRIFT_BOUND, t, drift_bound - drift);

        if run.algorithm == Algorithm::YuNeely {
            return Ok(());
        }

        let alpha = run.alpha.current;
        let required = alpha_required(problem, &run.weights);
        match run.alpha.mode {
            AlphaMode::Constant => {
                r.record(ALPHA_ABOVE_THRESHOLD, t, alpha - alpha_threshold(problem))
            }
            AlphaMode::Adaptive => {
                r.record(ALPHA_NONDECREASING, t, alpha - self.alpha_before);
                r.record(ALPHA_COVERS_CURVATURE, t, alpha - required);
                if let Some(am) = self.alpha_max {
                    r.record(ALPHA_BELOW_CAP, t, am - alpha);
                }
                let consts = problem.constants();
                if let (Some(l), Some(c), Some(rad)) =
                    (self.lambda_norm, consts.c_bound, consts.radius)
                {
                    if !problem.linear_constraints() {
                        let cap = 2.0 * l + rad * (2.0 * alpha).sqrt() + c;
                        r.record(QUEUE_NORM_CAP, t, cap - run.queue.norm());
                    }
                }
            }
        }
        self.alpha_before = alpha;

        if let Some(xs) = &self.x_star {
            let f_x = problem.objective_value(&run.x);
            let penalty = linalg::dot(&run.weights, &self.g_at_star).max(0.0);
            let base = self.f_at_star
                + penalty
                + alpha * (linalg::dist_sq(xs, &run.x_prev) - linalg::dist_sq(xs, &run.x))
                + 0.5 * (linalg::norm_sq(&run.g_x) - linalg::norm_sq(&run.g_prev));
            let step_sq = linalg::dist_sq(&run.x, &run.x_prev);
            let lhs = drift + f_x;
            let scale = 1.0 + lhs.abs().max(base.abs());
            r.record_tol(
                DPP_BOUND,
                t,
                base + (required - alpha) * step_sq - lhs,
                1e-9 * scale,
            );
            if problem.linear_constraints() && run.alpha.mode == AlphaMode::Constant {
                r.record_tol(DPP_LINEAR_BOUND, t, base - lhs, 1e-9 * scale);
            }
        }

        if let Some(rates) = self.rates {
            let f_bar = problem.objective_value(&run.x_bar);
            r.record(
                OBJECTIVE_RATE,
                t,
                rates.objective / count + rates.slack - (f_bar - self.f_star),
            );
            let g_bar = problem.eval_g(&run.x_bar)?;
            let worst = g_bar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            r.record(
                VIOLATION_RATE,
                t,
                rates.violation / count + rates.slack - worst,
            );
        }

        if self.check_smooth_step && run.weights.iter().all(|&w| w >= 0.0) {
            let y = kernels::smooth_step(problem, &run.x_prev, &run.weights, alpha)?;
            let diff = y
                .iter()
                .zip(&run.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            r.record_tol(PROJECTED_GRADIENT_EQUIVALENCE, t, -diff, 1e-12);
        }
        Ok(())
    }
}
