use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::par::Parallelism;

/// A user-supplied smooth convex function.
pub trait SmoothFn: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub enum SmoothKind {
    /// `c`
    Constant(f64),
    /// `aᵀx + c`
    Linear {
        coeffs: Vec<f64>,
        constant: f64,
    },
    /// `xᵀQx + aᵀx + c` with symmetric `Q`.
    Quadratic {
        matrix: DenseMatrix,
        linear: Vec<f64>,
        constant: f64,
    },
    /// `w‖x‖² + c`
    SquaredNorm {
        weight: f64,
        constant: f64,
    },
    Custom(Arc<dyn SmoothFn>),
}

/// Smooth function with its gradient and smoothness modulus (the Lipschitz
/// constant of the gradient).
#[derive(Debug, Clone)]
pub struct SmoothOracle {
    kind: SmoothKind,
    dim: usize,
    smoothness: f64,
}

impl SmoothOracle {
    pub fn constant(dim: usize, value: f64) -> Self {
        Self {
            kind: SmoothKind::Constant(value),
            dim,
            smoothness: 0.0,
        }
    }

    pub fn linear(coeffs: Vec<f64>, constant: f64) -> Self {
        Self {
            dim: coeffs.len(),
            kind: SmoothKind::Linear { coeffs, constant },
            smoothness: 0.0,
        }
    }

    /// `xᵀQx + aᵀx + c`. `Q` is symmetrised; the smoothness modulus defaults
    /// to `2 · max_i Σ_j |Q_ij|`, an upper bound on `2‖Q‖₂`.
    pub fn quadratic(matrix: DenseMatrix, linear: Vec<f64>, constant: f64) -> Result<Self> {
        let n = matrix.rows();
        if matrix.cols() != n {
            return Err(Error::InvalidProblem(
                "quadratic form needs a square matrix".into(),
            ));
        }
        check_len("quadratic linear term", n, linear.len())?;
        let matrix = if matrix.is_symmetric(0.0) {
            matrix
        } else {
            let t = matrix.transpose();
            let data = matrix
                .as_slice()
                .iter()
                .zip(t.as_slice())
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            DenseMatrix::from_row_major(n, n, data)?
        };
        let smoothness = 2.0 * matrix.max_abs_row_sum();
        Ok(Self {
            kind: SmoothKind::Quadratic {
                matrix,
                linear,
                constant,
            },
            dim: n,
            smoothness,
        })
    }

    pub fn squared_norm(dim: usize, weight: f64, constant: f64) -> Self {
        Self {
            kind: SmoothKind::SquaredNorm { weight, constant },
            dim,
            smoothness: 2.0 * weight.abs(),
        }
    }

    pub fn custom(dim: usize, f: Arc<dyn SmoothFn>, smoothness: f64) -> Self {
        Self {
            kind: SmoothKind::Custom(f),
            dim,
            smoothness,
        }
    }

    pub fn with_smoothness(mut self, smoothness: f64) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn kind(&self) -> &SmoothKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn is_linear(&self) -> bool {
        self.smoothness == 0.0
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        check_len("smooth oracle", n, self.dim)?;
        if !(self.smoothness >= 0.0) {
            return Err(Error::InvalidProblem(
                "smoothness modulus must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], policy: Parallelism) -> f64 {
        match &self.kind {
            SmoothKind::Constant(c) => *c,
            SmoothKind::Linear { coeffs, constant } => linalg::dot(coeffs, x) + constant,
            SmoothKind::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                let qx = matrix.matvec(policy, x);
                linalg::dot(x, &qx) + linalg::dot(linear, x) + constant
            }
            SmoothKind::SquaredNorm { weight, constant } => weight * linalg::norm_sq(x) + constant,
            SmoothKind::Custom(f) => f.value(x),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64], policy: Parallelism) {
        match &self.kind {
            SmoothKind::Constant(_) => out.fill(0.0),
            SmoothKind::Linear { coeffs, .. } => out.copy_from_slice(coeffs),
            SmoothKind::Quadratic { matrix, linear, .. } => {
                matrix.matvec_into(policy, x, out);
                for (o, a) in out.iter_mut().zip(linear) {
                    *o = 2.0 * *o + a;
                }
            }
            SmoothKind::SquaredNorm { weight, .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = 2.0 * weight * v;
                }
            }
            SmoothKind::Custom(f) => f.gradient_into(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64], policy: Parallelism) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g, policy);
        g
    }

    /// Value and gradient with a single mat-vec for quadratic forms.
    pub fn value_and_gradient_into(&self, x: &[f64], out: &mut [f64], policy: Parallelism) -> f64 {
        match &self.kind {
            SmoothKind::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                matrix.matvec_into(policy, x, out);
                let xqx = linalg::dot(x, out);
                for (o, a) in out.iter_mut().zip(linear) {
                    *o = 2.0 * *o + a;
                }
                xqx + linalg::dot(linear, x) + constant
            }
            _ => {
                self.gradient_into(x, out, policy);
                self.value(x, policy)
            }
        }
    }
}
