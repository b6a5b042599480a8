//! Per-coordinate update kernels.
//!
//! Each coordinate of the main solver's update minimises
//!
//! ```text
//! alpha·(x − x_prev)² + d·x + h(x)   over [lo, hi]
//! ```
//!
//! with `h = e·|x|` in the common case (closed form) or an arbitrary scalar
//! convex function (bisection on the subgradient).

use crate::error::{Error, Result};
use crate::par;
use crate::problem::{Problem, ScalarConvex, SeparableTerm};

/// One scalar subproblem `alpha·(x − x_prev)² + d·x + e·|x|` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateSubproblem {
    pub alpha: f64,
    pub x_prev: f64,
    pub d: f64,
    pub e: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CoordinateSubproblem {
    pub fn objective(&self, x: f64) -> f64 {
        let dx = x - self.x_prev;
        self.alpha * dx * dx + self.d * x + self.e * x.abs()
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.e >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "l1 coefficient must be >= 0, got {}",
                self.e
            )));
        }
        if !(self.lo <= self.hi) {
            return Err(Error::InvalidArgument(format!(
                "empty interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Closed-form minimiser of a [`CoordinateSubproblem`] (soft threshold
/// followed by clamping). At the threshold boundary the result is `clamp(0)`.
pub fn solve_l1_scalar(sub: &CoordinateSubproblem) -> Result<f64> {
    sub.validate()?;
    Ok(soft_threshold(
        sub.alpha, sub.x_prev, sub.d, sub.e, sub.lo, sub.hi,
    ))
}

#[inline]
pub(crate) fn soft_threshold(alpha: f64, x_prev: f64, d: f64, e: f64, lo: f64, hi: f64) -> f64 {
    let u = x_prev - d / (2.0 * alpha);
    let thr = e / (2.0 * alpha);
    let v = if u > thr {
        u - thr
    } else if u < -thr {
        u + thr
    } else {
        0.0
    };
    v.max(lo).min(hi)
}

pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITERS: usize = 200;

/// Minimises `alpha·(x − x_prev)² + d·x + h(x)` on `[lo, hi]` for any scalar
/// convex `h` by bisection on `ψ(x) = 2·alpha·(x − x_prev) + d + h'(x)`,
/// where `h'` is `h`'s subgradient selector. Infinite bounds are bracketed
/// by doubling. A decreasing `ψ` is reported as [`Error::NonConvex`].
pub fn solve_scalar_generic(
    alpha: f64,
    x_prev: f64,
    d: f64,
    h: &dyn ScalarConvex,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    let psi = |x: f64| 2.0 * alpha * (x - x_prev) + d + h.subgradient(x);

    let mut a = lo;
    let mut psi_a = if lo.is_finite() {
        psi(lo)
    } else {
        f64::NEG_INFINITY
    };
    let mut b = hi;
    let mut psi_b = if hi.is_finite() {
        psi(hi)
    } else {
        f64::INFINITY
    };
    if lo < hi && psi_a > psi_b {
        return Err(Error::NonConvex { lo, hi });
    }
    if psi_a >= 0.0 {
        return Ok(lo);
    }
    if psi_b <= 0.0 {
        return Ok(hi);
    }

    // Bracket infinite sides: the quadratic term eventually dominates.
    let anchor = x_prev - d / (2.0 * alpha);
    if !a.is_finite() {
        let start = if b.is_finite() { anchor.min(b) } else { anchor };
        let mut step = 1.0_f64;
        loop {
            let p = start - step;
            let v = psi(p);
            if v < 0.0 {
                a = p;
                psi_a = v;
                break;
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::NonConvex { lo: p, hi: start });
            }
        }
    }
    if !b.is_finite() {
        let start = anchor.max(a);
        let mut step = 1.0_f64;
        loop {
            let p = start + step;
            let v = psi(p);
            if v > 0.0 {
                b = p;
                psi_b = v;
                break;
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::NonConvex { lo: start, hi: p });
            }
        }
    }

    for _ in 0..BISECTION_MAX_ITERS {
        if b - a <= BISECTION_TOL {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let v = psi(m);
        if v < psi_a || v > psi_b {
            return Err(Error::NonConvex { lo: a, hi: b });
        }
        if v == 0.0 {
            return Ok(m);
        } else if v < 0.0 {
            a = m;
            psi_a = v;
        } else {
            b = m;
            psi_b = v;
        }
    }
    Ok(0.5 * (a + b))
}

/// Projected gradient step `P[x_prev − d/(2·alpha)]` with
/// `d = ∇f(x_prev) + Σ_k w_k ∇g_k(x_prev)`, valid when every separable term
/// vanishes. `multipliers` are `w_k = Q_k + G_k(x_prev)` and must be
/// nonnegative.
pub fn smooth_step(
    problem: &Problem,
    x_prev: &[f64],
    multipliers: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    crate::error::check_len("smooth_step x", problem.dim(), x_prev.len())?;
    crate::error::check_len(
        "smooth_step multipliers",
        problem.num_constraints(),
        multipliers.len(),
    )?;
    if !problem.is_smooth() {
        return Err(Error::InvalidArgument(
            "smooth_step requires zero separable terms".into(),
        ));
    }
    if let Some((k, w)) = multipliers.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "multiplier {k} is negative ({w})"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let mut d = vec![0.0; problem.dim()];
    let mut scratch = vec![0.0; problem.dim()];
    linear_coefficients(problem, x_prev, multipliers, &mut d, &mut scratch);
    let bounds = problem.bounds();
    Ok(x_prev
        .iter()
        .zip(&d)
        .enumerate()
        .map(|(i, (&x, &di))| bounds.clamp(i, x - di / (2.0 * alpha)))
        .collect())
}

/// `d = ∇f(x) + Σ_k w_k ∇g_k(x)`, accumulated in constraint order.
pub fn linear_coefficients(
    problem: &Problem,
    x: &[f64],
    weights: &[f64],
    d: &mut [f64],
    scratch: &mut [f64],
) {
    let policy = problem.parallelism();
    problem.objective().gradient_into(x, d, policy);
    for (c, &w) in problem.constraints().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        if let crate::problem::SmoothKind::Linear { coeffs, .. } = c.smooth.kind() {
            crate::linalg::axpy(w, coeffs, d);
        } else if !matches!(c.smooth.kind(), crate::problem::SmoothKind::Constant(_)) {
            c.smooth.gradient_into(x, scratch, policy);
            crate::linalg::axpy(w, scratch, d);
        }
    }
}

/// `f̃_i(v) + Σ_k w_k g̃_k,i(v)` for a fixed coordinate `i`.
#[derive(Debug)]
struct WeightedSeparable<'a> {
    i: usize,
    objective: &'a SeparableTerm,
    terms: &'a [(f64, &'a SeparableTerm)],
}

impl ScalarConvex for WeightedSeparable<'_> {
    fn value(&self, v: f64) -> f64 {
        self.terms
            .iter()
            .fold(self.objective.coord_value(self.i, v), |acc, (w, t)| {
                acc + w * t.coord_value(self.i, v)
            })
    }

    fn subgradient(&self, v: f64) -> f64 {
        self.terms.iter().fold(
            self.objective.coord_subgradient(self.i, v),
            |acc, (w, t)| acc + w * t.coord_subgradient(self.i, v),
        )
    }
}

/// Combined l1 weight `c_0 + Σ_k w_k c_k` when every separable term is zero
/// or weighted-l1; `None` when some term is custom.
pub fn combined_l1_weight(problem: &Problem, weights: &[f64]) -> Option<f64> {
    let mut e = problem.objective_separable().l1_weight()?;
    for (c, &w) in problem.constraints().iter().zip(weights) {
        let ck = c.separable.l1_weight()?;
        if ck != 0.0 {
            e += w * ck;
        }
    }
    Some(e)
}

/// Solves every coordinate subproblem of the main update, writing `x(t)`
/// into `out`. Uses the closed form whenever the separable terms are all
/// l1, otherwise the generic scalar solver.
pub fn coordinate_update(
    problem: &Problem,
    x_prev: &[f64],
    d: &[f64],
    weights: &[f64],
    alpha: f64,
    out: &mut [f64],
) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let policy = problem.parallelism();
    let bounds = problem.bounds();
    let (lo, hi) = (bounds.lower(), bounds.upper());
    if let Some(e) = combined_l1_weight(problem, weights) {
        if !(e >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "combined l1 coefficient is negative ({e})"
            )));
        }
        par::fill_indexed(policy, out, |i| {
            soft_threshold(alpha, x_prev[i], d[i], e, lo[i], hi[i])
        });
        return Ok(());
    }
    let terms: Vec<(f64, &SeparableTerm)> = problem
        .constraints()
        .iter()
        .zip(weights)
        .filter(|(c, w)| **w != 0.0 && !c.separable.is_zero())
        .map(|(c, &w)| (w, &c.separable))
        .collect();
    if let Some((w, _)) = terms.iter().find(|(w, _)| *w < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative weight {w} on a nonsmooth constraint term"
        )));
    }
    let solved = par::map_indexed(policy, out.len(), |i| {
        let h = WeightedSeparable {
            i,
            objective: problem.objective_separable(),
            terms: &terms,
        };
        solve_scalar_generic(alpha, x_prev[i], d[i], &h, lo[i], hi[i])
    });
    for (o, v) in out.iter_mut().zip(solved) {
        *o = v?;
    }
    Ok(())
}
