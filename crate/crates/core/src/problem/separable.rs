use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A convex function of one real variable.
pub trait ScalarConvex: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    /// One element of the subdifferential at `x`. At a kink whose
    /// subdifferential contains 0 the selector returns 0.
    fn subgradient(&self, x: f64) -> f64;
}

/// `weight · |x|`
#[derive(Debug, Clone, Copy)]
pub struct AbsTerm {
    pub weight: f64,
}

impl ScalarConvex for AbsTerm {
    fn value(&self, x: f64) -> f64 {
        self.weight * x.abs()
    }

    fn subgradient(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.weight
        } else if x < 0.0 {
            -self.weight
        } else {
            0.0
        }
    }
}

/// `weight · max(0, x − shift)`
#[derive(Debug, Clone, Copy)]
pub struct PositivePart {
    pub weight: f64,
    pub shift: f64,
}

impl ScalarConvex for PositivePart {
    fn value(&self, x: f64) -> f64 {
        self.weight * (x - self.shift).max(0.0)
    }

    fn subgradient(&self, x: f64) -> f64 {
        if x > self.shift {
            self.weight
        } else {
            0.0
        }
    }
}

/// Separable, possibly nonsmooth term `Σ_i h_i(x_i)`.
#[derive(Debug, Clone, Default)]
pub enum SeparableTerm {
    #[default]
    Zero,
    /// `c · ‖x‖₁` with `c ≥ 0`.
    WeightedL1(f64),
    /// One scalar convex function per coordinate.
    Custom(Arc<[Arc<dyn ScalarConvex>]>),
}

impl SeparableTerm {
    pub fn custom(table: Vec<Arc<dyn ScalarConvex>>) -> Self {
        SeparableTerm::Custom(table.into())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            SeparableTerm::Zero => Ok(()),
            SeparableTerm::WeightedL1(c) if *c >= 0.0 && c.is_finite() => Ok(()),
            SeparableTerm::WeightedL1(c) => Err(Error::InvalidProblem(format!(
                "l1 weight must be >= 0, got {c}"
            ))),
            SeparableTerm::Custom(t) if t.len() == n => Ok(()),
            SeparableTerm::Custom(t) => Err(Error::Dimension {
                context: "separable table",
                expected: n,
                actual: t.len(),
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SeparableTerm::Zero)
            || matches!(self, SeparableTerm::WeightedL1(c) if *c == 0.0)
    }

    /// The l1 weight when this term is zero or weighted-l1.
    pub fn l1_weight(&self) -> Option<f64> {
        match self {
            SeparableTerm::Zero => Some(0.0),
            SeparableTerm::WeightedL1(c) => Some(*c),
            SeparableTerm::Custom(_) => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SeparableTerm::Zero => 0.0,
            SeparableTerm::WeightedL1(c) => c * x.iter().map(|v| v.abs()).sum::<f64>(),
            SeparableTerm::Custom(t) => t.iter().zip(x).map(|(h, &v)| h.value(v)).sum(),
        }
    }

    pub fn coord_value(&self, i: usize, v: f64) -> f64 {
        match self {
            SeparableTerm::Zero => 0.0,
            SeparableTerm::WeightedL1(c) => c * v.abs(),
            SeparableTerm::Custom(t) => t[i].value(v),
        }
    }

    /// Subgradient selector for coordinate `i`; returns 0 at the l1 kink.
    pub fn coord_subgradient(&self, i: usize, v: f64) -> f64 {
        match self {
            SeparableTerm::Zero => 0.0,
            SeparableTerm::WeightedL1(c) => AbsTerm { weight: *c }.subgradient(v),
            SeparableTerm::Custom(t) => t[i].subgradient(v),
        }
    }
}
