//! Reference solutions `(x*, λ*, F*)` for bound checks and cross-checks:
//! closed-form KKT points, exhaustive grid search in up to three
//! dimensions, and long adaptive runs for everything else.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::par;
use crate::problem::{Problem, SeparableTerm};
use crate::solvers::{self, Algorithm, SolverConfig};

/// Multiplier fits with a stationarity residual above this are not trusted.
pub const DUAL_CONFIDENCE_RESIDUAL: f64 = 1e-3;

/// Largest grid the brute-force solver will scan.
pub const MAX_GRID_POINTS: usize = 50_000_000;

pub const MIN_LONG_RUN_ITERS: u64 = 100_000;

/// Distance from a bound, kink or constraint boundary below which a
/// long-run average is treated as sitting on it.
pub const LONG_RUN_ACTIVE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethod {
    Analytic,
    Grid,
    LongRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub f_star: f64,
    pub method: ReferenceMethod,
    /// Accuracy of `f_star` and of the feasibility of `x_star`.
    pub tolerance: f64,
    /// Whether `lambda_star` can be used by multiplier-dependent checks.
    pub lambda_confident: bool,
    pub dual_residual: f64,
}

impl ReferenceSolution {
    /// A hand-derived KKT pair. `F*` is re-evaluated at `x_star`.
    pub fn analytic(problem: &Problem, x_star: Vec<f64>, lambda_star: Vec<f64>) -> Result<Self> {
        check_len("x*", problem.dim(), x_star.len())?;
        check_len("lambda*", problem.num_constraints(), lambda_star.len())?;
        let f_star = problem.objective_value(&x_star);
        let r = Self {
            x_star,
            lambda_star,
            f_star,
            method: ReferenceMethod::Analytic,
            tolerance: 1e-10 * (1.0 + f_star.abs()),
            lambda_confident: true,
            dual_residual: 0.0,
        };
        r.validate(problem)?;
        Ok(r)
    }

    /// Checks box membership, feasibility within `tolerance`, the sign of
    /// the multipliers, complementary slackness (analytic entries) and that
    /// `f_star` is `F(x_star)`.
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        check_len("x*", problem.dim(), self.x_star.len())?;
        check_len("lambda*", problem.num_constraints(), self.lambda_star.len())?;
        if !problem.bounds().contains(&self.x_star) {
            return Err(Error::InvalidArgument(
                "reference point lies outside the box".into(),
            ));
        }
        let g = problem.eval_g(&self.x_star)?;
        let tol = self.tolerance.max(1e-12);
        for (k, (gk, c)) in g.iter().zip(problem.constraints()).enumerate() {
            let viol = if c.equality { gk.abs() } else { *gk };
            if viol > tol {
                return Err(Error::Infeasible {
                    point: self.x_star.clone(),
                    violation: viol,
                });
            }
            let l = self.lambda_star[k];
            if !c.equality && l < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative multiplier {l} on row {k}"
                )));
            }
            if self.method == ReferenceMethod::Analytic && (l * gk).abs() > tol * (1.0 + l.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "complementary slackness fails on row {k}: {l} * {gk}"
                )));
            }
        }
        let f = problem.objective_value(&self.x_star);
        if f.to_bits() != self.f_star.to_bits() {
            return Err(Error::InvalidArgument(format!(
                "stored F* {} differs from F(x*) = {f}",
                self.f_star
            )));
        }
        Ok(())
    }
}

/// Multipliers fitted at a candidate optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEstimate {
    pub lambda: Vec<f64>,
    /// Norm of the projected stationarity residual at the fitted multipliers.
    pub residual: f64,
    pub active: Vec<bool>,
}

impl DualEstimate {
    pub fn confident(&self) -> bool {
        self.residual <= DUAL_CONFIDENCE_RESIDUAL
    }
}

/// Brute-force minimiser over the grid `lo + j·h` of a finite box with
/// `n ≤ 3`. Points count as feasible when every `G_k ≤ h·β`. Ties go to the
/// lexicographically smallest grid index.
pub fn grid_solve(problem: &Problem, resolution: f64) -> Result<ReferenceSolution> {
    let n = problem.dim();
    if n == 0 || n > 3 {
        return Err(Error::InvalidArgument(format!(
            "grid search supports 1 to 3 variables, got {n}"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let bounds = problem.bounds();
    if !bounds.is_finite() {
        return Err(Error::InvalidArgument(
            "grid search needs a finite box".into(),
        ));
    }
    let counts: Vec<usize> = (0..n)
        .map(|i| ((bounds.upper()[i] - bounds.lower()[i]) / resolution).round() as usize + 1)
        .collect();
    let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    let total = match total {
        Some(t) if t <= MAX_GRID_POINTS => t,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "grid of {counts:?} points is too large"
            )))
        }
    };
    let point = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let j = rem % counts[i];
            rem /= counts[i];
            x[i] = (bounds.lower()[i] + j as f64 * resolution).min(bounds.upper()[i]);
        }
        x
    };
    let slack = resolution * problem.constants().beta + 1e-12;
    let m = problem.num_constraints();
    let violation = |x: &[f64]| -> f64 {
        let mut g = vec![0.0; m];
        problem.eval_g_into(x, &mut g);
        problem.violation_of(&g)
    };
    let policy = problem.parallelism();
    let best = par::argmin_indexed(policy, total, |idx| {
        let x = point(idx);
        (violation(&x) <= slack).then(|| problem.objective_value(&x))
    });
    let Some((idx, _)) = best else {
        let (idx, v) = par::argmin_indexed(policy, total, |idx| Some(violation(&point(idx))))
            .expect("grid is non-empty");
        return Err(Error::Infeasible {
            point: point(idx),
            violation: v,
        });
    };
    let x_star = point(idx);
    let f_star = problem.objective_value(&x_star);
    let discretisation = 2.0 * resolution * objective_slope(problem, &x_star, resolution);
    let dual = dual_estimate(problem, &x_star, (discretisation + slack).max(resolution))?;
    // relaxing the constraints by `slack` can lower the optimum by about λ*·slack
    let relaxation = slack * linalg::l1_norm(&dual.lambda);
    let tolerance = (discretisation + relaxation).max(slack);
    Ok(ReferenceSolution {
        x_star,
        lambda_star: dual.lambda.clone(),
        f_star,
        method: ReferenceMethod::Grid,
        tolerance,
        lambda_confident: dual.confident(),
        dual_residual: dual.residual,
    })
}

/// Bound on the slope of `F` within one grid cell of `x`, times `√n`.
fn objective_slope(problem: &Problem, x: &[f64], h: f64) -> f64 {
    let n = problem.dim() as f64;
    let grad = problem.objective().gradient(x, problem.parallelism());
    let sep = match problem.objective_separable() {
        SeparableTerm::Zero => 0.0,
        SeparableTerm::WeightedL1(c) => c * n.sqrt(),
        SeparableTerm::Custom(_) => {
            let s: Vec<f64> = (0..x.len())
                .map(|i| {
                    problem
                        .objective_separable()
                        .coord_subgradient(i, x[i])
                        .abs()
                        + 1.0
                })
                .collect();
            linalg::norm(&s)
        }
    };
    n.sqrt() * (linalg::norm(&grad) + problem.l_f() * h * n.sqrt() + sep)
}

/// Gradients of `f` and of each `g_k` (plus selectors of custom separable
/// terms) at a point, with the l1 weights kept apart so kinks can be
/// treated as intervals.
struct StationarityData {
    obj_grad: Vec<f64>,
    obj_l1: f64,
    con_grads: Vec<Vec<f64>>,
    con_l1: Vec<f64>,
    at_lower: Vec<bool>,
    at_upper: Vec<bool>,
    at_kink: Vec<bool>,
}

impl StationarityData {
    fn new(problem: &Problem, x: &[f64], tol: f64) -> Self {
        let policy = problem.parallelism();
        let n = problem.dim();
        let with_selector = |term: &SeparableTerm, mut d: Vec<f64>| {
            if let SeparableTerm::Custom(_) = term {
                for (i, di) in d.iter_mut().enumerate() {
                    *di += term.coord_subgradient(i, x[i]);
                }
            }
            d
        };
        let l1 = |t: &SeparableTerm| {
            if let SeparableTerm::WeightedL1(c) = t {
                *c
            } else {
                0.0
            }
        };
        let obj_grad = with_selector(
            problem.objective_separable(),
            problem.objective().gradient(x, policy),
        );
        let con_grads = problem
            .constraints()
            .iter()
            .map(|c| with_selector(&c.separable, c.smooth.gradient(x, policy)))
            .collect();
        let con_l1: Vec<f64> = problem
            .constraints()
            .iter()
            .map(|c| l1(&c.separable))
            .collect();
        let obj_l1 = l1(problem.objective_separable());
        let any_l1 = obj_l1 > 0.0 || con_l1.iter().any(|&c| c > 0.0);
        let bounds = problem.bounds();
        Self {
            obj_grad,
            obj_l1,
            con_grads,
            con_l1,
            at_lower: (0..n).map(|i| x[i] - bounds.lower()[i] <= tol).collect(),
            at_upper: (0..n).map(|i| bounds.upper()[i] - x[i] <= tol).collect(),
            at_kink: (0..n).map(|i| any_l1 && x[i].abs() <= tol).collect(),
        }
    }

    /// Distance of 0 from the subdifferential of the Lagrangian plus the
    /// normal cone of the box, coordinate by coordinate.
    fn residual(&self, x: &[f64], lambda: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..x.len() {
            let mut s = self.obj_grad[i];
            let mut e = self.obj_l1;
            for (k, l) in lambda.iter().enumerate() {
                s += l * self.con_grads[k][i];
                e += l * self.con_l1[k];
            }
            let (a, b) = if self.at_kink[i] {
                (s - e.abs(), s + e.abs())
            } else {
                let v = s + e * x[i].signum();
                (v, v)
            };
            let r = match (self.at_lower[i], self.at_upper[i]) {
                (true, true) => 0.0,
                (true, false) => (-b).max(0.0),
                (false, true) => a.max(0.0),
                (false, false) => a.max(0.0) + (-b).max(0.0),
            };
            total += r * r;
        }
        total.sqrt()
    }
}

/// Norm of the projected stationarity residual of the Lagrangian at `x`
/// with multipliers `lambda`. Coordinates within `tol` of a bound or of an
/// l1 kink are treated as sitting on it.
pub fn stationarity_residual(
    problem: &Problem,
    x: &[f64],
    lambda: &[f64],
    tol: f64,
) -> Result<f64> {
    check_len("x", problem.dim(), x.len())?;
    check_len("lambda", problem.num_constraints(), lambda.len())?;
    Ok(StationarityData::new(problem, x, tol).residual(x, lambda))
}

/// Fits `λ ≥ 0` on the constraints active at `x_star` (those with
/// `G_k ≥ −tol`) to minimise the projected stationarity residual of the
/// Lagrangian; inactive rows get 0. Active sets of up to 16 rows are solved
/// exactly by enumerating supports.
pub fn dual_estimate(problem: &Problem, x_star: &[f64], tol: f64) -> Result<DualEstimate> {
    let n = problem.dim();
    check_len("x*", n, x_star.len())?;
    let m = problem.num_constraints();
    let g = problem.eval_g(x_star)?;
    let active: Vec<bool> = g
        .iter()
        .zip(problem.constraints())
        .map(|(v, c)| c.equality || *v >= -tol)
        .collect();
    let rows: Vec<usize> = (0..m).filter(|&k| active[k]).collect();
    if rows.len() > 16 {
        return Err(Error::InvalidArgument(format!(
            "{} active constraints is too many to fit",
            rows.len()
        )));
    }
    let data = StationarityData::new(problem, x_star, tol);

    // Coordinates where stationarity is an equation.
    let free: Vec<usize> = (0..n)
        .filter(|&i| !data.at_lower[i] && !data.at_upper[i] && !data.at_kink[i])
        .collect();
    let sign = |i: usize| x_star[i].signum();
    let rhs = |i: usize| -(data.obj_grad[i] + data.obj_l1 * sign(i));
    let column = |k: usize, i: usize| data.con_grads[k][i] + data.con_l1[k] * sign(i);

    let mut best = vec![0.0; m];
    let mut best_res = data.residual(x_star, &best);
    for mask in 1u32..(1u32 << rows.len()) {
        let support: Vec<usize> = (0..rows.len())
            .filter(|j| mask & (1 << j) != 0)
            .map(|j| rows[j])
            .collect();
        let p = support.len();
        let mut ata = vec![vec![0.0; p]; p];
        let mut atb = vec![0.0; p];
        for &i in &free {
            for (a, &ka) in support.iter().enumerate() {
                atb[a] += column(ka, i) * rhs(i);
                for (b, &kb) in support.iter().enumerate() {
                    ata[a][b] += column(ka, i) * column(kb, i);
                }
            }
        }
        let Some(sol) = linalg::solve_dense(ata, atb) else {
            continue;
        };
        let mut lambda = vec![0.0; m];
        let mut ok = true;
        for (j, &k) in support.iter().enumerate() {
            if !problem.constraints()[k].equality && sol[j] < 0.0 {
                ok = false;
            }
            lambda[k] = sol[j];
        }
        if !ok || lambda.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let res = data.residual(x_star, &lambda);
        if res < best_res {
            best_res = res;
            best = lambda;
        }
    }
    Ok(DualEstimate {
        lambda: best,
        residual: best_res,
        active,
    })
}

/// Runs `new-adaptive` for `iterations` steps and returns the running
/// average. The tolerance is the adaptive objective bound at the horizon
/// (with the final weight in place of its cap) plus the remaining violation.
pub fn long_run_reference(problem: &Problem, iterations: u64) -> Result<ReferenceSolution> {
    if iterations < MIN_LONG_RUN_ITERS {
        return Err(Error::InvalidArgument(format!(
            "long-run references need at least {MIN_LONG_RUN_ITERS} iterations, got {iterations}"
        )));
    }
    let config = SolverConfig {
        max_iters: iterations,
        stride: iterations,
        ..SolverConfig::default()
    };
    let run = solvers::run(problem, Algorithm::NewAdaptive, &config)?;
    let x_star = run.x_bar.clone();
    let f_star = problem.objective_value(&x_star);
    let radius = problem.constants().radius.unwrap_or_else(|| {
        problem
            .bounds()
            .diameter()
            .min(linalg::dist(&x_star, &run.x_start))
    });
    let bound = run.alpha.current * radius * radius / iterations as f64;
    let tolerance = bound + problem.max_violation(&x_star);
    // Two multiplier candidates: a least-squares fit at x̄ and the final
    // queue weights Q(T) + G(x(T−1)); keep whichever is more stationary.
    let tol = LONG_RUN_ACTIVE_TOL;
    let fit = dual_estimate(problem, &x_star, tol)?;
    let mut lambda = fit.lambda;
    let mut residual = fit.residual;
    let weights: Vec<f64> = run
        .weights
        .iter()
        .zip(problem.constraints())
        .map(|(&w, c)| if c.equality { w } else { w.max(0.0) })
        .collect();
    let queue_residual = stationarity_residual(problem, &x_star, &weights, tol)?;
    if queue_residual < residual {
        lambda = weights;
        residual = queue_residual;
    }
    Ok(ReferenceSolution {
        x_star,
        lambda_star: lambda,
        f_star,
        method: ReferenceMethod::LongRun,
        tolerance,
        lambda_confident: residual <= DUAL_CONFIDENCE_RESIDUAL,
        dual_residual: residual,
    })
}

/// Reference solutions stored as JSON files named by the SHA-256 of an
/// instance descriptor.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<D: Serialize>(descriptor: &D) -> Result<String> {
        let bytes = serde_json::to_vec(descriptor)?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<ReferenceSolution>> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    pub fn store(&self, key: &str, reference: &ReferenceSolution) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(key);
        fs::write(&path, serde_json::to_string_pretty(reference)?)?;
        Ok(path)
    }

    /// Loads the cached entry for `descriptor`, or computes and stores it.
    pub fn get_or_compute<D, F>(&self, descriptor: &D, compute: F) -> Result<ReferenceSolution>
    where
        D: Serialize,
        F: FnOnce() -> Result<ReferenceSolution>,
    {
        let key = Self::key(descriptor)?;
        if let Some(r) = self.load(&key)? {
            return Ok(r);
        }
        let r = compute()?;
        self.store(&key, &r)?;
        Ok(r)
    }
}
