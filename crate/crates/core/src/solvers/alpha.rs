use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::Problem;

/// Safety factor applied to the smallest admissible constant `alpha`.
pub const DEFAULT_ALPHA_INFLATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    Constant,
    Adaptive,
}

/// Proximal weight schedule of the main solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRule {
    pub mode: AlphaMode,
    pub alpha_const: Option<f64>,
    pub current: f64,
    /// Upper bound on the adaptive weight, when it could be computed.
    pub alpha_max_diag: Option<f64>,
}

/// `½(β² + L_f)`: constant weights must exceed it.
pub fn alpha_threshold(problem: &Problem) -> f64 {
    let beta = problem.constants().beta;
    0.5 * (beta * beta + problem.l_f())
}

/// `½(β² + L_f + wᵀL_g)` for multipliers `w`.
pub fn alpha_required(problem: &Problem, weights: &[f64]) -> f64 {
    let lg = problem.l_g();
    alpha_threshold(problem) + 0.5 * linalg::dot(weights, &lg)
}

pub fn default_constant_alpha(problem: &Problem) -> f64 {
    alpha_threshold(problem) * (1.0 + DEFAULT_ALPHA_INFLATION)
}

impl AlphaRule {
    /// Constant weight; `None` picks the default. Values not above
    /// `½(β² + L_f)` are rejected.
    pub fn constant(problem: &Problem, alpha: Option<f64>) -> Result<Self> {
        let threshold = alpha_threshold(problem);
        let a = alpha.unwrap_or_else(|| default_constant_alpha(problem));
        if !(a > threshold) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "constant alpha must exceed (beta^2 + L_f)/2 = {threshold}, got {a}"
            )));
        }
        Ok(Self {
            mode: AlphaMode::Constant,
            alpha_const: Some(a),
            current: a,
            alpha_max_diag: None,
        })
    }

    /// Non-decreasing weight, starting from the value required by the
    /// initial multipliers.
    pub fn adaptive(problem: &Problem, initial_weights: &[f64]) -> Self {
        Self {
            mode: AlphaMode::Adaptive,
            alpha_const: None,
            current: alpha_required(problem, initial_weights),
            alpha_max_diag: None,
        }
    }

    /// Weight for the iteration whose multipliers are `weights`.
    pub fn advance(&mut self, problem: &Problem, weights: &[f64]) -> f64 {
        if self.mode == AlphaMode::Adaptive {
            self.current = self.current.max(alpha_required(problem, weights));
        }
        self.current
    }
}

/// Cap on the adaptive weight:
/// `[√(½β² + ½L_f + ‖λ*‖‖L_g‖ + C‖L_g‖) + (√2/2)·R·‖L_g‖]²`.
/// `C` and `R` are only needed when some constraint is nonlinear.
pub fn compute_alpha_max(problem: &Problem, lambda_norm: f64) -> Result<f64> {
    let lg = linalg::norm(&problem.l_g());
    let base = alpha_threshold(problem);
    if lg == 0.0 {
        return Ok(base);
    }
    let c = problem
        .constants()
        .c_bound
        .ok_or(Error::MissingConstant("C (bound on ||G||)"))?;
    let r = problem
        .constants()
        .radius
        .ok_or(Error::MissingConstant("R (diameter of the box)"))?;
    let root = (base + lambda_norm * lg + c * lg).sqrt() + std::f64::consts::FRAC_1_SQRT_2 * r * lg;
    Ok(root * root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BoxSet, Constants, Constraint, SeparableTerm, SmoothOracle};

    fn scalar(g: SmoothOracle, c: Option<f64>, r: Option<f64>) -> Problem {
        Problem::new(
            "t",
            SmoothOracle::squared_norm(1, 1.0, 0.0),
            SeparableTerm::Zero,
            vec![Constraint::smooth(g)],
            BoxSet::uniform(1, -10.0, 10.0).unwrap(),
            Constants {
                beta: 1.0,
                c_bound: c,
                radius: r,
            },
        )
        .unwrap()
    }

    #[test]
    fn alpha_max_collapses_for_linear_constraints() {
        let p = scalar(SmoothOracle::linear(vec![-1.0], 1.0), None, None);
        assert_eq!(compute_alpha_max(&p, 3.0).unwrap(), 0.5 + 1.0);
    }

    #[test]
    fn alpha_max_direct_substitution() {
        // beta = 1, L_f = 2, L_g = (1), |lambda| = 0, C = 1, R -> 0
        let g = SmoothOracle::squared_norm(1, 0.5, 0.0);
        let p = scalar(g.clone(), Some(1.0), Some(1e-300));
        assert!((compute_alpha_max(&p, 0.0).unwrap() - 2.5).abs() < 1e-12);
        let p = scalar(g, None, Some(1.0));
        assert!(matches!(
            compute_alpha_max(&p, 0.0),
            Err(Error::MissingConstant(_))
        ));
    }

    #[test]
    fn constant_rule_requires_strict_inequality() {
        let p = scalar(SmoothOracle::linear(vec![-1.0], 1.0), None, None);
        assert!(AlphaRule::constant(&p, Some(1.5)).is_err());
        assert_eq!(AlphaRule::constant(&p, Some(2.0)).unwrap().current, 2.0);
        assert!((AlphaRule::constant(&p, None).unwrap().current - 1.5015).abs() < 1e-12);
    }

    #[test]
    fn adaptive_rule_is_monotone() {
        let p = scalar(
            SmoothOracle::squared_norm(1, 1.0, -1.0),
            Some(100.0),
            Some(20.0),
        );
        let mut rule = AlphaRule::adaptive(&p, &[1.0]);
        assert_eq!(rule.current, 1.5 + 1.0);
        assert_eq!(rule.advance(&p, &[0.0]), 2.5);
        assert_eq!(rule.advance(&p, &[3.0]), 4.5);
    }
}
