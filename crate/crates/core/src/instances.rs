//! Seeded problem generators.
//!
//! | name    | problem                                                        |
//! |---------|----------------------------------------------------------------|
//! | `qp1`   | `min x²` s.t. `1 − x ≤ 0`, `x ∈ [−10, 10]`                      |
//! | `ball1` | `min cᵀx` s.t. `‖x‖² ≤ b`, `x ∈ [−1, 1]ⁿ`                        |
//! | `gmv-l2`| `min xᵀMx` s.t. `Σx ≥ 1`, `‖x‖² ≤ b`, `x ∈ [0, 1]ⁿ`              |
//! | `gmv-l1`| `min xᵀMx` s.t. `Σx ≥ 1` (or `= 1`), `‖x‖₁ ≤ b`, `x ∈ [−B, B]ⁿ`   |
//! | `lasso` | `min ‖Ax − y‖² + λ‖x‖₁` s.t. `−u ≤ x ≤ u`, `x ∈ [−10, 10]ⁿ`      |
//!
//! `M` is a random correlation matrix. All randomness comes from
//! [`SplitMix64`](crate::rng::SplitMix64), so a descriptor regenerates a
//! bit-identical problem on any platform.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::oracle::ReferenceSolution;
use crate::problem::config::{save_problem, MatrixStorage};
use crate::problem::{BoxSet, Constants, Constraint, Problem, SeparableTerm, SmoothOracle};
use crate::rng::SplitMix64;

pub const INSTANCE_NAMES: [&str; 5] = ["qp1", "ball1", "gmv-l2", "gmv-l1", "lasso"];

pub const DEFAULT_BALL_RADIUS_SQ: f64 = 0.25;
pub const DEFAULT_GMV_L1_BOUND: f64 = 2.0;
pub const DEFAULT_LASSO_BOUND: f64 = 2.0;
pub const LASSO_BOX: f64 = 10.0;
pub const LASSO_NOISE: f64 = 0.1;

/// Parameters that fully determine a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Constraint level: `b` of `ball1`/`gmv-*`, `u` of `lasso`.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub lambda_weight: Option<f64>,
    /// Rows of `A` for `lasso` (defaults to `2n`).
    #[serde(default)]
    pub rows: Option<usize>,
    /// `gmv-l1` only: keep the budget as an equality row.
    #[serde(default)]
    pub equality: bool,
}

impl InstanceDescriptor {
    pub fn new(name: impl Into<String>, n: usize, seed: u64) -> Self {
        Self {
            name: name.into(),
            n,
            seed,
            b: None,
            lambda_weight: None,
            rows: None,
            equality: false,
        }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    /// Number of constraints of the generated problem.
    pub fn m(&self) -> usize {
        match self.name.as_str() {
            "qp1" | "ball1" => 1,
            "gmv-l2" | "gmv-l1" => 2,
            "lasso" => 2 * self.n,
            _ => 0,
        }
    }

    pub fn note(&self) -> &'static str {
        match self.name.as_str() {
            "qp1" => "one-dimensional QP with a linear constraint; closed-form KKT point",
            "ball1" => "linear objective over a Euclidean ball; closed-form KKT point",
            "gmv-l2" => "minimum-variance portfolio with relaxed budget and l2 cap",
            "gmv-l1" => "minimum-variance portfolio with budget and l1 leverage cap",
            "lasso" => "l1-regularised least squares with bound constraints, planted sparse truth",
            _ => "unknown",
        }
    }

    pub fn build(&self) -> Result<Instance> {
        let (problem, reference) = match self.name.as_str() {
            "qp1" => {
                if self.n != 1 {
                    return Err(Error::InvalidArgument("qp1 is one-dimensional".into()));
                }
                let (p, r) = gen_qp1()?;
                (p, Some(r))
            }
            "ball1" => {
                let (p, r) =
                    gen_ball1_with(self.n, self.seed, self.b.unwrap_or(DEFAULT_BALL_RADIUS_SQ))?;
                (p, Some(r))
            }
            "gmv-l2" => {
                let b = self.b.unwrap_or(3.0 / self.n as f64);
                (gen_gmv_l2_with(self.n, self.seed, b)?, None)
            }
            "gmv-l1" => {
                let b = self.b.unwrap_or(DEFAULT_GMV_L1_BOUND);
                (gen_gmv_l1(self.n, self.seed, b, self.equality)?, None)
            }
            "lasso" => {
                let rows = self.rows.unwrap_or(2 * self.n);
                let lam = self.lambda_weight.unwrap_or(1.0);
                let u = self.b.unwrap_or(DEFAULT_LASSO_BOUND);
                (
                    gen_constrained_lasso(rows, self.n, self.seed, lam, u)?,
                    None,
                )
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown instance '{other}' (expected one of {})",
                    INSTANCE_NAMES.join(", ")
                )))
            }
        };
        Ok(Instance {
            descriptor: self.clone(),
            problem,
            reference,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub descriptor: InstanceDescriptor,
    pub problem: Problem,
    /// Closed-form reference when one is known.
    pub reference: Option<ReferenceSolution>,
}

impl Instance {
    /// Writes the problem as `<dir>/<stem>.toml` with its matrices as CSV
    /// files beside it.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        save_problem(
            &self.problem,
            &dir.join(format!("{stem}.toml")),
            &MatrixStorage::Csv {
                stem: stem.to_string(),
            },
        )
    }
}

/// `min x²` s.t. `1 − x ≤ 0` on `[−10, 10]`; `x* = 1`, `λ* = 2`, `F* = 1`.
pub fn gen_qp1() -> Result<(Problem, ReferenceSolution)> {
    let problem = Problem::new(
        "qp1",
        SmoothOracle::squared_norm(1, 1.0, 0.0),
        SeparableTerm::Zero,
        vec![Constraint::smooth(SmoothOracle::linear(vec![-1.0], 1.0))],
        BoxSet::uniform(1, -10.0, 10.0)?,
        Constants {
            beta: 1.0,
            c_bound: Some(11.0),
            radius: Some(20.0),
        },
    )?;
    let reference = ReferenceSolution::analytic(&problem, vec![1.0], vec![2.0])?;
    Ok((problem, reference))
}

/// `min cᵀx` s.t. `‖x‖² − b ≤ 0` on `[−1, 1]ⁿ` with the given `c`.
/// For `0 < b ≤ 1` the ball sits inside the box, so
/// `x* = −√b·c/‖c‖`, `λ* = ‖c‖/(2√b)` and `F* = −√b‖c‖` (`x* = 0`,
/// `λ* = 0` when `c = 0`).
pub fn ball1_problem(c: Vec<f64>, b: f64) -> Result<(Problem, ReferenceSolution)> {
    let n = c.len();
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ball1 needs 0 < b <= 1, got {b}"
        )));
    }
    let nf = n as f64;
    let problem = Problem::new(
        "ball1",
        SmoothOracle::linear(c.clone(), 0.0),
        SeparableTerm::Zero,
        vec![Constraint::smooth(SmoothOracle::squared_norm(n, 1.0, -b))],
        BoxSet::uniform(n, -1.0, 1.0)?,
        Constants {
            beta: 2.0 * nf.sqrt(),
            c_bound: Some(b.max(nf - b)),
            radius: Some(2.0 * nf.sqrt()),
        },
    )?;
    let norm_c = linalg::norm(&c);
    let (x_star, lambda) = if norm_c == 0.0 {
        (vec![0.0; n], 0.0)
    } else {
        let r = b.sqrt();
        (
            c.iter().map(|v| -r * v / norm_c).collect(),
            norm_c / (2.0 * r),
        )
    };
    let reference = ReferenceSolution::analytic(&problem, x_star, vec![lambda])?;
    Ok((problem, reference))
}

pub fn gen_ball1(n: usize, seed: u64) -> Result<(Problem, ReferenceSolution)> {
    gen_ball1_with(n, seed, DEFAULT_BALL_RADIUS_SQ)
}

/// `ball1` with standard normal `c`.
pub fn gen_ball1_with(n: usize, seed: u64, b: f64) -> Result<(Problem, ReferenceSolution)> {
    if n == 0 {
        return Err(Error::InvalidArgument("ball1 needs n >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let c = (0..n).map(|_| rng.standard_normal()).collect();
    ball1_problem(c, b)
}

/// `M = D^{−1/2} NᵀN D^{−1/2}` with `D = Diag(NᵀN)` and standard normal
/// `N` (n×n, filled row by row). A zero column of `N` is redrawn.
pub fn gen_correlation_matrix(n: usize, seed: u64) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix needs n >= 2, got {n}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut data: Vec<f64> = (0..n * n).map(|_| rng.standard_normal()).collect();
    for j in 0..n {
        while (0..n).all(|i| data[i * n + j] == 0.0) {
            for i in 0..n {
                data[i * n + j] = rng.standard_normal();
            }
        }
    }
    let nmat = DenseMatrix::from_row_major(n, n, data)?;
    let s = nmat.gram(crate::par::Parallelism::Sequential);
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / s.get(i, i).sqrt()).collect();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in 0..i {
            let v = (s.get(i, j) * scale[i] * scale[j]).clamp(-1.0, 1.0);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

fn budget_row(n: usize) -> Constraint {
    Constraint::smooth(SmoothOracle::linear(vec![-1.0; n], 1.0))
}

pub fn gen_gmv_l2(n: usize, seed: u64) -> Result<Problem> {
    gen_gmv_l2_with(n, seed, 3.0 / n as f64)
}

/// `min xᵀMx` s.t. `1 − Σx ≤ 0`, `‖x‖² − b ≤ 0`, `x ∈ [0, 1]ⁿ`.
pub fn gen_gmv_l2_with(n: usize, seed: u64, b: f64) -> Result<Problem> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gmv-l2 needs b > 0, got {b}"
        )));
    }
    let m = gen_correlation_matrix(n, seed)?;
    let nf = n as f64;
    let c1 = (nf - 1.0).max(1.0);
    let c2 = b.max(nf - b);
    Problem::new(
        "gmv-l2",
        SmoothOracle::quadratic(m, vec![0.0; n], 0.0)?,
        SeparableTerm::Zero,
        vec![
            budget_row(n),
            Constraint::smooth(SmoothOracle::squared_norm(n, 1.0, -b)),
        ],
        BoxSet::uniform(n, 0.0, 1.0)?,
        Constants {
            beta: (5.0 * nf).sqrt(),
            c_bound: Some((c1 * c1 + c2 * c2).sqrt()),
            radius: Some(nf.sqrt()),
        },
    )
}

/// `min xᵀMx` s.t. `1 − Σx ≤ 0` (or `Σx − 1 = 0` with `equality`) and
/// `‖x‖₁ − b ≤ 0`, on `[−B, B]ⁿ` with `B = max(1, b)` so the box never
/// binds at a feasible point.
pub fn gen_gmv_l1(n: usize, seed: u64, b: f64, equality: bool) -> Result<Problem> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gmv-l1 needs b > 0, got {b}"
        )));
    }
    let m = gen_correlation_matrix(n, seed)?;
    let nf = n as f64;
    let half_width = b.max(1.0);
    let budget = if equality {
        Constraint::equality(SmoothOracle::linear(vec![1.0; n], -1.0))
    } else {
        budget_row(n)
    };
    let c1 = 1.0 + nf * half_width;
    let c2 = b.max(nf * half_width - b);
    Problem::new(
        "gmv-l1",
        SmoothOracle::quadratic(m, vec![0.0; n], 0.0)?,
        SeparableTerm::Zero,
        vec![
            budget,
            Constraint::new(
                SmoothOracle::constant(n, -b),
                SeparableTerm::WeightedL1(1.0),
            ),
        ],
        BoxSet::uniform(n, -half_width, half_width)?,
        Constants {
            beta: (2.0 * nf).sqrt(),
            c_bound: Some((c1 * c1 + c2 * c2).sqrt()),
            radius: Some(2.0 * half_width * nf.sqrt()),
        },
    )
}

/// Gaussian design, planted truth and observations of a `lasso` instance.
#[derive(Debug, Clone)]
pub struct LassoData {
    pub design: DenseMatrix,
    pub truth: Vec<f64>,
    pub observations: Vec<f64>,
}

/// `rows × n` standard normal `A`, truth with `max(1, n/5)` nonzeros of
/// magnitude in `[0.5, 1.5)` and random sign, `y = A·truth + 0.1·noise`.
pub fn lasso_data(rows: usize, n: usize, seed: u64) -> Result<LassoData> {
    if rows == 0 || n == 0 {
        return Err(Error::InvalidArgument("lasso needs rows, n >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let a: Vec<f64> = (0..rows * n).map(|_| rng.standard_normal()).collect();
    let design = DenseMatrix::from_row_major(rows, n, a)?;
    let mut truth = vec![0.0; n];
    let k = (n / 5).max(1);
    let mut placed = 0;
    while placed < k {
        let i = (rng.next_u64() % n as u64) as usize;
        if truth[i] == 0.0 {
            let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
            truth[i] = sign * rng.uniform(0.5, 1.5);
            placed += 1;
        }
    }
    let mut observations = design.matvec(crate::par::Parallelism::Sequential, &truth);
    for y in &mut observations {
        *y += LASSO_NOISE * rng.standard_normal();
    }
    Ok(LassoData {
        design,
        truth,
        observations,
    })
}

/// `min ‖Ax − y‖² + λ‖x‖₁` s.t. `x_i − u ≤ 0`, `−x_i − u ≤ 0`, on
/// `[−10, 10]ⁿ`, built from [`lasso_data`].
pub fn gen_constrained_lasso(
    rows: usize,
    n: usize,
    seed: u64,
    lambda_weight: f64,
    u: f64,
) -> Result<Problem> {
    if !(lambda_weight >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda weight must be >= 0, got {lambda_weight}"
        )));
    }
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lasso bound must be positive, got {u}"
        )));
    }
    let data = lasso_data(rows, n, seed)?;
    lasso_problem(&data, lambda_weight, u)
}

pub fn lasso_problem(data: &LassoData, lambda_weight: f64, u: f64) -> Result<Problem> {
    let n = data.design.cols();
    let gram = data.design.gram(crate::par::Parallelism::Sequential);
    let aty = data.design.transpose_matvec(&data.observations);
    let linear: Vec<f64> = aty.iter().map(|v| -2.0 * v).collect();
    let constant = linalg::norm_sq(&data.observations);
    let mut constraints = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let mut coeffs = vec![0.0; n];
            coeffs[i] = sign;
            constraints.push(Constraint::smooth(SmoothOracle::linear(coeffs, -u)));
        }
    }
    let nf = n as f64;
    Problem::new(
        "lasso",
        SmoothOracle::quadratic(gram, linear, constant)?,
        if lambda_weight > 0.0 {
            SeparableTerm::WeightedL1(lambda_weight)
        } else {
            SeparableTerm::Zero
        },
        constraints,
        BoxSet::uniform(n, -LASSO_BOX, LASSO_BOX)?,
        Constants {
            beta: 2f64.sqrt(),
            c_bound: Some((2.0 * nf).sqrt() * (LASSO_BOX + u)),
            radius: Some(2.0 * LASSO_BOX * nf.sqrt()),
        },
    )
}

#[cfg(test)]
mod tests;
