use serde::{Deserialize, Serialize};

use crate::queue::INVARIANT_TOL;

/// Outcome of one named runtime check accumulated over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub trials: u64,
    pub violations: u64,
    /// Smallest `bound − value` seen; negative means violated.
    pub worst_slack: Option<f64>,
    /// Iteration of the first violation.
    pub first_violation: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckSummary>,
    /// Checks that could not run, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl DiagnosticsReport {
    /// Records one trial. The check fails when `slack < −1e−9` or is NaN.
    pub fn record(&mut self, name: &str, t: u64, slack: f64) {
        self.record_tol(name, t, slack, INVARIANT_TOL);
    }

    /// Like [`record`](Self::record) with an explicit tolerance.
    pub fn record_tol(&mut self, name: &str, t: u64, slack: f64, tol: f64) {
        let idx = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(CheckSummary {
                    name: name.to_string(),
                    trials: 0,
                    violations: 0,
                    worst_slack: None,
                    first_violation: None,
                });
                self.checks.len() - 1
            }
        };
        let c = &mut self.checks[idx];
        c.trials += 1;
        let failed = !(slack >= -tol);
        if failed {
            c.violations += 1;
            c.first_violation.get_or_insert(t);
        }
        c.worst_slack = Some(match c.worst_slack {
            Some(w) if w.is_nan() || slack >= w => w,
            _ => slack,
        });
    }

    pub fn skip(&mut self, name: &str, reason: impl Into<String>) {
        if !self.skipped.iter().any(|(n, _)| n == name) {
            self.skipped.push((name.to_string(), reason.into()));
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn total_violations(&self) -> u64 {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.total_violations() == 0
    }

    /// Folds `other` into `self`, summing trials and keeping the worst slack.
    pub fn merge(&mut self, other: &DiagnosticsReport) {
        for c in &other.checks {
            match self.checks.iter_mut().find(|s| s.name == c.name) {
                Some(s) => {
                    s.trials += c.trials;
                    s.violations += c.violations;
                    s.first_violation = s.first_violation.or(c.first_violation);
                    s.worst_slack = match (s.worst_slack, c.worst_slack) {
                        (Some(a), Some(b)) => Some(if b < a || b.is_nan() { b } else { a }),
                        (a, b) => a.or(b),
                    };
                }
                None => self.checks.push(c.clone()),
            }
        }
        for (n, r) in &other.skipped {
            self.skip(n, r.clone());
        }
    }
}

/// Names of the runtime checks.
pub mod names {
    pub const QUEUE_NONNEGATIVE: &str = "queue_nonnegative";
    pub const MULTIPLIER_NONNEGATIVE: &str = "multiplier_nonnegative";
    pub const INITIAL_QUEUE_NORM: &str = "initial_queue_norm_below_constraint";
    pub const QUEUE_NORM_DOMINATES: &str = "queue_norm_dominates_constraint";
    pub const QUEUE_DOMINATES_CUMULATIVE: &str = "queue_dominates_cumulative_constraint";
    pub const DRIFT_BOUND: &str = "drift_bound";
    pub const DPP_BOUND: &str = "drift_plus_penalty_bound";
    pub const DPP_LINEAR_BOUND: &str = "drift_plus_penalty_linear_bound";
    pub const ALPHA_ABOVE_THRESHOLD: &str = "alpha_above_threshold";
    pub const ALPHA_NONDECREASING: &str = "alpha_nondecreasing";
    pub const ALPHA_COVERS_CURVATURE: &str = "alpha_covers_curvature";
    pub const ALPHA_BELOW_CAP: &str = "alpha_below_cap";
    pub const QUEUE_NORM_CAP: &str = "queue_norm_cap";
    pub const OBJECTIVE_RATE: &str = "objective_rate";
    pub const VIOLATION_RATE: &str = "violation_rate";
    pub const RUNNING_AVERAGE: &str = "running_average";
    pub const ITERATE_IN_BOX: &str = "iterate_in_box";
    pub const PROJECTED_GRADIENT_EQUIVALENCE: &str = "projected_gradient_equivalence";

    /// Checks on the virtual queue alone.
    pub const QUEUE_CHECKS: [&str; 6] = [
        QUEUE_NONNEGATIVE,
        MULTIPLIER_NONNEGATIVE,
        INITIAL_QUEUE_NORM,
        QUEUE_NORM_DOMINATES,
        QUEUE_DOMINATES_CUMULATIVE,
        DRIFT_BOUND,
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_tracks_worst_slack_and_first_violation() {
        let mut r = DiagnosticsReport::default();
        r.record("a", 0, 1.0);
        r.record("a", 1, 0.5);
        r.record("a", 2, 2.0);
        assert_eq!(r.check("a").unwrap().worst_slack, Some(0.5));
        assert!(r.passed());
        r.record("a", 3, -1e-10);
        assert!(r.passed());
        r.record("a", 4, -1e-6);
        r.record("a", 5, f64::NAN);
        let c = r.check("a").unwrap();
        assert_eq!((c.trials, c.violations, c.first_violation), (6, 2, Some(4)));
        assert!(!r.passed());
    }

    #[test]
    fn merge_sums_trials() {
        let mut a = DiagnosticsReport::default();
        a.record("x", 0, 1.0);
        let mut b = DiagnosticsReport::default();
        b.record("x", 0, -1.0);
        b.record("y", 0, 0.0);
        b.skip("z", "no reference");
        a.merge(&b);
        assert_eq!(a.check("x").unwrap().trials, 2);
        assert_eq!(a.check("x").unwrap().worst_slack, Some(-1.0));
        assert_eq!(a.total_violations(), 1);
        assert_eq!(a.skipped.len(), 1);
    }
}
