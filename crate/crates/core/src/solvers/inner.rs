//! Accelerated proximal gradient for the baseline's per-iteration
//! subproblem
//!
//! ```text
//! min_{x ∈ box}  F(x) + wᵀG(x) + alpha·‖x − x_prev‖²
//! ```
//!
//! Each proximal step is a coordinate update from [`crate::kernels`] on the
//! linearisation of the smooth part at the extrapolated point.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels;
use crate::linalg;
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerSolverConfig {
    /// Stop once one step changes the subproblem objective by at most this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Subproblem objective `F(x) + wᵀG(x) + alpha·‖x − x_prev‖²`.
pub fn subproblem_objective(
    problem: &Problem,
    x: &[f64],
    x_prev: &[f64],
    weights: &[f64],
    alpha: f64,
) -> f64 {
    let mut v = problem.objective_value(x) + alpha * linalg::dist_sq(x, x_prev);
    for (c, &w) in problem.constraints().iter().zip(weights) {
        if w != 0.0 {
            v += w * c.value(x, problem.parallelism());
        }
    }
    v
}

/// Solves the subproblem starting from `x_prev`. With a zero budget the
/// start point is returned unconverged. Otherwise returns the best iterate
/// found, flagged unconverged when the budget ran out first.
pub fn solve_subproblem(
    problem: &Problem,
    x_prev: &[f64],
    weights: &[f64],
    alpha: f64,
    config: &InnerSolverConfig,
) -> Result<InnerOutcome> {
    let n = problem.dim();
    let start_obj = subproblem_objective(problem, x_prev, x_prev, weights, alpha);
    let mut best = InnerOutcome {
        x: x_prev.to_vec(),
        objective: start_obj,
        iterations: 0,
        converged: false,
    };
    if config.max_iters == 0 {
        return Ok(best);
    }

    let curvature: f64 = problem
        .constraints()
        .iter()
        .zip(weights)
        .map(|(c, &w)| w.max(0.0) * c.smooth.smoothness())
        .sum();
    let lipschitz = problem.l_f() + curvature + 2.0 * alpha;
    let mu = 2.0 * alpha;
    let kappa_root = (lipschitz / mu).sqrt();
    let momentum = (kappa_root - 1.0) / (kappa_root + 1.0);

    let mut x = x_prev.to_vec();
    let mut y = x_prev.to_vec();
    let mut next = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut prev_obj = start_obj;

    for k in 1..=config.max_iters {
        kernels::linear_coefficients(problem, &y, weights, &mut d, &mut scratch);
        for i in 0..n {
            d[i] += 2.0 * alpha * (y[i] - x_prev[i]);
        }
        kernels::coordinate_update(problem, &y, &d, weights, 0.5 * lipschitz, &mut next)?;
        let obj = subproblem_objective(problem, &next, x_prev, weights, alpha);
        if obj < best.objective {
            best.x.copy_from_slice(&next);
            best.objective = obj;
        }
        best.iterations = k;
        if (prev_obj - obj).abs() <= config.tolerance {
            best.converged = true;
            break;
        }
        for i in 0..n {
            y[i] = next[i] + momentum * (next[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut next);
        prev_obj = obj;
    }
    Ok(best)
}
