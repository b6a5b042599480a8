//! Constrained composite convex programs
//!
//! ```text
//! min  f(x) + f̃(x)   s.t.  G_k(x) = g_k(x) + g̃_k(x) ≤ 0,  x ∈ X
//! ```
//!
//! with smooth `f`, `g_k`, separable (possibly nonsmooth) `f̃`, `g̃_k`, and a
//! box `X`.

mod boxset;
pub mod config;
mod separable;
mod smooth;

use std::sync::Arc;

pub use boxset::BoxSet;
pub use separable::{AbsTerm, PositivePart, ScalarConvex, SeparableTerm};
pub use smooth::{SmoothFn, SmoothKind, SmoothOracle};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::par::Parallelism;
use crate::rng::SplitMix64;

/// One constraint `G_k(x) = g_k(x) + g̃_k(x) ≤ 0` (or `= 0` when `equality`).
#[derive(Debug, Clone)]
pub struct Constraint {
    pub smooth: SmoothOracle,
    pub separable: SeparableTerm,
    /// Linear equality handled by a signed additive virtual queue.
    pub equality: bool,
}

impl Constraint {
    pub fn new(smooth: SmoothOracle, separable: SeparableTerm) -> Self {
        Self {
            smooth,
            separable,
            equality: false,
        }
    }

    pub fn smooth(smooth: SmoothOracle) -> Self {
        Self::new(smooth, SeparableTerm::Zero)
    }

    pub fn equality(smooth: SmoothOracle) -> Self {
        Self {
            smooth,
            separable: SeparableTerm::Zero,
            equality: true,
        }
    }

    pub fn value(&self, x: &[f64], policy: Parallelism) -> f64 {
        self.smooth.value(x, policy) + self.separable.value(x)
    }
}

/// Problem-level constants used by the step-size rules and the bound
/// diagnostics. They are caller-supplied; see [`Problem::lipschitz_estimate`]
/// for a numeric sanity check of `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Lipschitz modulus of `G` over `X`.
    pub beta: f64,
    /// Bound on `‖G(x)‖` over `X`.
    pub c_bound: Option<f64>,
    /// Diameter bound of `X`.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    n: usize,
    objective: SmoothOracle,
    objective_separable: SeparableTerm,
    constraints: Vec<Constraint>,
    bounds: BoxSet,
    constants: Constants,
    parallelism: Parallelism,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        objective: SmoothOracle,
        objective_separable: SeparableTerm,
        constraints: Vec<Constraint>,
        bounds: BoxSet,
        constants: Constants,
    ) -> Result<Self> {
        let n = bounds.dim();
        if n == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        objective.check_dim(n)?;
        objective_separable.check_dim(n)?;
        for c in &constraints {
            c.smooth.check_dim(n)?;
            c.separable.check_dim(n)?;
            if c.equality && (!c.smooth.is_linear() || !c.separable.is_zero()) {
                return Err(Error::InvalidProblem(
                    "equality-masked constraints must be linear".into(),
                ));
            }
        }
        if !(constants.beta > 0.0) || !constants.beta.is_finite() {
            return Err(Error::InvalidProblem(
                "beta must be positive and finite".into(),
            ));
        }
        for (name, v) in [("C", constants.c_bound), ("R", constants.radius)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::InvalidProblem(format!("{name} must be positive")));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            objective,
            objective_separable,
            constraints,
            bounds,
            constants,
            parallelism: Parallelism::default(),
        })
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &SmoothOracle {
        &self.objective
    }

    pub fn objective_separable(&self) -> &SeparableTerm {
        &self.objective_separable
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn set_constants(&mut self, constants: Constants) {
        self.constants = constants;
    }

    pub fn equality_mask(&self) -> Vec<bool> {
        self.constraints.iter().map(|c| c.equality).collect()
    }

    pub fn has_equality(&self) -> bool {
        self.constraints.iter().any(|c| c.equality)
    }

    /// Smoothness modulus `L_f` of the objective.
    pub fn l_f(&self) -> f64 {
        self.objective.smoothness()
    }

    /// Per-constraint smoothness moduli `L_g`.
    pub fn l_g(&self) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.smooth.smoothness())
            .collect()
    }

    /// True when every `g_k` is linear (`L_g = 0`).
    pub fn linear_constraints(&self) -> bool {
        self.constraints.iter().all(|c| c.smooth.is_linear())
    }

    /// True when `f̃ ≡ 0` and every `g̃_k ≡ 0`.
    pub fn is_smooth(&self) -> bool {
        self.objective_separable.is_zero() && self.constraints.iter().all(|c| c.separable.is_zero())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.value(x, self.parallelism) + self.objective_separable.value(x)
    }

    /// `G(x)`, stacked.
    pub fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("eval_g", self.n, x.len())?;
        let mut out = vec![0.0; self.constraints.len()];
        self.eval_g_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_g_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.constraints) {
            *o = c.value(x, self.parallelism);
        }
    }

    /// Largest constraint violation: `max(G_k, 0)` for inequalities and
    /// `|G_k|` for equality rows; `0` when there are no constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.constraints.len()];
        self.eval_g_into(x, &mut g);
        self.violation_of(&g)
    }

    pub fn violation_of(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(&self.constraints)
            .map(|(v, c)| if c.equality { v.abs() } else { v.max(0.0) })
            .fold(0.0, f64::max)
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.bounds.project(x)
    }

    /// Sampled lower estimate of the Lipschitz modulus of `G` over `X`:
    /// the largest `‖G(x) − G(y)‖ / ‖x − y‖` over all pairs of `samples`
    /// random points, plus a short perturbation of each point. Unbounded
    /// coordinates are sampled within `[-10, 10]` of the finite side.
    pub fn lipschitz_estimate(&self, samples: usize, seed: u64) -> Result<f64> {
        if samples < 2 {
            return Err(Error::InvalidArgument(
                "lipschitz_estimate needs samples >= 2".into(),
            ));
        }
        if self.bounds.is_singleton() {
            return Ok(0.0);
        }
        let mut rng = SplitMix64::new(seed);
        let window = |lo: f64, hi: f64| -> (f64, f64) {
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo, hi),
                (true, false) => (lo, lo + 20.0),
                (false, true) => (hi - 20.0, hi),
                (false, false) => (-10.0, 10.0),
            }
        };
        let mut points = Vec::with_capacity(2 * samples);
        for _ in 0..samples {
            let p: Vec<f64> = (0..self.n)
                .map(|i| {
                    let (lo, hi) = window(self.bounds.lower()[i], self.bounds.upper()[i]);
                    rng.uniform(lo, hi)
                })
                .collect();
            let q: Vec<f64> = p
                .iter()
                .map(|v| v + 1e-4 * (rng.next_open01() - 0.5))
                .collect();
            points.push(p);
            points.push(self.bounds.project(&q));
        }
        let values: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                let mut g = vec![0.0; self.constraints.len()];
                self.eval_g_into(p, &mut g);
                g
            })
            .collect();
        let mut best: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let dx = linalg::dist(&points[i], &points[j]);
                if dx > 0.0 {
                    best = best.max(linalg::dist(&values[i], &values[j]) / dx);
                }
            }
        }
        Ok(best)
    }
}

/// Shorthand for building a custom smooth oracle from closures.
pub fn custom_smooth<V, G>(dim: usize, value: V, gradient: G, smoothness: f64) -> SmoothOracle
where
    V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    struct Closure<V, G>(V, G);
    impl<V, G> std::fmt::Debug for Closure<V, G> {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("custom")
        }
    }
    impl<V, G> SmoothFn for Closure<V, G>
    where
        V: Fn(&[f64]) -> f64 + Send + Sync,
        G: Fn(&[f64], &mut [f64]) + Send + Sync,
    {
        fn value(&self, x: &[f64]) -> f64 {
            (self.0)(x)
        }
        fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
            (self.1)(x, out)
        }
    }
    SmoothOracle::custom(dim, Arc::new(Closure(value, gradient)), smoothness)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(g: SmoothOracle, lo: f64, hi: f64) -> Problem {
        Problem::new(
            "t",
            SmoothOracle::squared_norm(1, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![Constraint::smooth(g)],
            BoxSet::uniform(1, lo, hi).unwrap(),
            Constants {
                beta: 1.0,
                c_bound: None,
                radius: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn eval_g_examples() {
        let p = scalar_problem(SmoothOracle::linear(vec![-1.0], 1.0), -10.0, 10.0);
        assert_eq!(p.eval_g(&[1.0]).unwrap(), vec![0.0]);

        let p = Problem::new(
            "t",
            SmoothOracle::squared_norm(2, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![Constraint::smooth(SmoothOracle::linear(
                vec![1.0, 1.0],
                -1.0,
            ))],
            BoxSet::uniform(2, 0.0, 1.0).unwrap(),
            Constants {
                beta: 2f64.sqrt(),
                c_bound: None,
                radius: None,
            },
        )
        .unwrap();
        assert_eq!(p.eval_g(&[0.5, 0.5]).unwrap(), vec![0.0]);
        assert!(p.eval_g(&[0.5]).is_err());
    }

    #[test]
    fn eval_g_mixed_linear_and_l1() {
        // G1 = 1 − Σx, G2 = ‖x‖₁ − 0.006
        let p = Problem::new(
            "t",
            SmoothOracle::squared_norm(2, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![
                Constraint::smooth(SmoothOracle::linear(vec![-1.0, -1.0], 1.0)),
                Constraint::new(
                    SmoothOracle::constant(2, -0.006),
                    SeparableTerm::WeightedL1(1.0),
                ),
            ],
            BoxSet::uniform(2, -1.0, 1.0).unwrap(),
            Constants {
                beta: 2.0,
                c_bound: None,
                radius: None,
            },
        )
        .unwrap();
        let x = [0.01, -0.01];
        let g = p.eval_g(&x).unwrap();
        // independent scalar sums
        let g1 = 1.0 - (x[0] + x[1]);
        let g2 = x[0].abs() + x[1].abs() - 0.006;
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[0] - g1).abs() < 1e-15);
        assert!((g[1] - 0.014).abs() < 1e-15 && (g[1] - g2).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_estimate_examples() {
        let p = scalar_problem(SmoothOracle::linear(vec![-1.0], 1.0), -10.0, 10.0);
        for seed in [0, 1, 99] {
            let est = p.lipschitz_estimate(50, seed).unwrap();
            // difference quotients over pairs 1e-6 apart lose ~1e-9 to rounding
            assert!((est - 1.0).abs() < 1e-7, "{est}");
        }

        let p = scalar_problem(SmoothOracle::constant(1, 3.0), -1.0, 1.0);
        assert_eq!(p.lipschitz_estimate(20, 3).unwrap(), 0.0);

        let p = Problem::new(
            "t",
            SmoothOracle::squared_norm(2, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![Constraint::smooth(SmoothOracle::squared_norm(2, 1.0, 0.0))],
            BoxSet::uniform(2, 0.0, 1.0).unwrap(),
            Constants {
                beta: 2.0 * 2f64.sqrt(),
                c_bound: None,
                radius: None,
            },
        )
        .unwrap();
        let est = p.lipschitz_estimate(100, 7).unwrap();
        assert!(est <= 2.0 * 2f64.sqrt() + 1e-9 && est > 2.0, "{est}");

        let p = scalar_problem(SmoothOracle::linear(vec![-1.0], 1.0), 0.5, 0.5);
        assert_eq!(p.lipschitz_estimate(10, 0).unwrap(), 0.0);
        assert!(p.lipschitz_estimate(1, 0).is_err());
    }

    #[test]
    fn rejects_nonlinear_equality() {
        let err = Problem::new(
            "t",
            SmoothOracle::squared_norm(1, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![Constraint::equality(SmoothOracle::squared_norm(
                1, 1.0, -1.0,
            ))],
            BoxSet::uniform(1, -1.0, 1.0).unwrap(),
            Constants {
                beta: 1.0,
                c_bound: None,
                radius: None,
            },
        );
        assert!(err.is_err());
    }
}
