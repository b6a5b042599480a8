//! Virtual queues, Lyapunov drift, and the queue invariants as predicates.
//!
//! Inequality rows follow `Q_k ← max(−G_k, Q_k + G_k)`; rows flagged in the
//! equality mask use the signed rule `Q_k ← Q_k + G_k` and start at zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg;

/// Absolute tolerance for every queue invariant.
pub const INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<f64>,
    pub t: u64,
    /// `½‖Q(t)‖²`
    pub lyapunov: f64,
    /// `L(t) − L(t−1)`; zero before the first update.
    pub last_drift: f64,
    /// `Σ_{τ<t} G(x(τ))`, kept for diagnostics.
    pub cumulative_g: Vec<f64>,
}

impl QueueState {
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.q)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Applies one update in place.
    pub fn update(&mut self, g_now: &[f64], equality_mask: &[bool]) -> Result<()> {
        check_len("queue update", self.q.len(), g_now.len())?;
        check_len("equality mask", self.q.len(), equality_mask.len())?;
        for k in 0..self.q.len() {
            let g = g_now[k];
            self.q[k] = if equality_mask[k] {
                self.q[k] + g
            } else {
                (-g).max(self.q[k] + g)
            };
            self.cumulative_g[k] += g;
        }
        let before = self.lyapunov;
        self.lyapunov = 0.5 * linalg::norm_sq(&self.q);
        self.last_drift = self.lyapunov - before;
        self.t += 1;
        Ok(())
    }

    /// Multipliers `Q_k(t) + G_k(x(t−1))` used by the primal update.
    pub fn multipliers(&self, g_prev: &[f64]) -> Vec<f64> {
        self.q.iter().zip(g_prev).map(|(q, g)| q + g).collect()
    }
}

/// `Q_k(0) = max(0, −G_k(x(−1)))` for every row.
pub fn init_queue(g_init: &[f64]) -> QueueState {
    init_queue_masked(g_init, &vec![false; g_init.len()])
}

/// Like [`init_queue`], with equality rows starting at zero.
pub fn init_queue_masked(g_init: &[f64], equality_mask: &[bool]) -> QueueState {
    let q: Vec<f64> = g_init
        .iter()
        .zip(equality_mask)
        .map(|(g, &eq)| if eq { 0.0 } else { (-g).max(0.0) })
        .collect();
    QueueState {
        lyapunov: 0.5 * linalg::norm_sq(&q),
        last_drift: 0.0,
        cumulative_g: vec![0.0; q.len()],
        t: 0,
        q,
    }
}

/// Functional form of [`QueueState::update`].
pub fn update_queue(
    state: &QueueState,
    g_now: &[f64],
    equality_mask: &[bool],
) -> Result<QueueState> {
    let mut next = state.clone();
    next.update(g_now, equality_mask)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    /// `bound − actual`; negative when violated.
    pub slack: f64,
}

impl BoundCheck {
    pub fn from_slack(slack: f64) -> Self {
        Self {
            holds: slack >= -INVARIANT_TOL,
            slack,
        }
    }
}

/// Checks `Δ(t) ≤ Q(t)ᵀG(x(t)) + ‖G(x(t))‖²` for the update from
/// `state_before` with `g_now`.
pub fn drift_bound_check(
    state_before: &QueueState,
    g_now: &[f64],
    equality_mask: &[bool],
) -> Result<BoundCheck> {
    let after = update_queue(state_before, g_now, equality_mask)?;
    let drift = after.lyapunov - state_before.lyapunov;
    let bound = linalg::dot(&state_before.q, g_now) + linalg::norm_sq(g_now);
    Ok(BoundCheck::from_slack(bound - drift))
}

/// Smallest `Q_k` over inequality rows (`+∞` when there are none).
pub fn min_queue(q: &[f64], equality_mask: &[bool]) -> f64 {
    q.iter()
        .zip(equality_mask)
        .filter(|(_, eq)| !**eq)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `Q_k(t) + G_k(x(t−1))` over inequality rows.
pub fn min_multiplier(q: &[f64], g_prev: &[f64], equality_mask: &[bool]) -> f64 {
    q.iter()
        .zip(g_prev)
        .zip(equality_mask)
        .filter(|(_, eq)| !**eq)
        .map(|((a, b), _)| a + b)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `Q_k(t) − Σ_{τ<t} G_k(x(τ))` over all rows.
pub fn min_cumulative_slack(state: &QueueState) -> f64 {
    state
        .q
        .iter()
        .zip(&state.cumulative_g)
        .map(|(q, s)| q - s)
        .fold(f64::INFINITY, f64::min)
}

/// `‖Q‖ − ‖G‖` restricted to inequality rows.
pub fn norm_dominance_slack(q: &[f64], g: &[f64], equality_mask: &[bool]) -> f64 {
    let (mut qq, mut gg) = (0.0, 0.0);
    for ((a, b), eq) in q.iter().zip(g).zip(equality_mask) {
        if !eq {
            qq += a * a;
            gg += b * b;
        }
    }
    qq.sqrt() - gg.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn init_examples() {
        assert_eq!(init_queue(&[2.0]).q, vec![0.0]);
        assert_eq!(init_queue(&[-3.0]).q, vec![3.0]);
        let s = init_queue(&[-1.0, 4.0, 0.0]);
        assert_eq!(s.q, vec![1.0, 0.0, 0.0]);
        assert_eq!(s.t, 0);
        assert_eq!(s.lyapunov, 0.5);
    }

    #[test]
    fn update_examples() {
        let mut s = init_queue(&[-2.0]);
        s.update(&[-5.0], &[false]).unwrap();
        assert_eq!(s.q, vec![5.0]);
        assert_eq!(s.t, 1);
        assert_eq!(s.last_drift, 12.5 - 2.0);

        let s = update_queue(&init_queue(&[0.0]), &[3.0], &[false]).unwrap();
        assert_eq!(s.q, vec![3.0]);

        let mut s = init_queue_masked(&[5.0], &[true]);
        s.q[0] = 1.0;
        s.update(&[-0.4], &[true]).unwrap();
        assert!((s.q[0] - 0.6).abs() < 1e-15);

        assert!(update_queue(&s, &[1.0, 2.0], &[true]).is_err());
    }

    #[test]
    fn equality_rows_may_go_negative() {
        let mut s = init_queue_masked(&[0.3, -1.0], &[true, false]);
        assert_eq!(s.q, vec![0.0, 1.0]);
        s.update(&[-0.5, -0.5], &[true, false]).unwrap();
        assert_eq!(s.q, vec![-0.5, 0.5]);
        assert_eq!(min_queue(&s.q, &[true, false]), 0.5);
    }

    #[test]
    fn drift_examples() {
        let c = drift_bound_check(&init_queue(&[0.0]), &[1.0], &[false]).unwrap();
        assert!(c.holds);
        assert_eq!(c.slack, 0.5);

        let mut s = init_queue(&[-2.0]);
        assert_eq!(s.q, vec![2.0]);
        let c = drift_bound_check(&s, &[0.0], &[false]).unwrap();
        assert!(c.holds);
        assert_eq!(c.slack, 0.0);
        s.update(&[0.0], &[false]).unwrap();
        assert_eq!(s.last_drift, 0.0);
    }

    #[test]
    fn random_drift_checks_never_fail() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..10_000 {
            let m = 1 + (rng.next_u64() % 5) as usize;
            let mask: Vec<bool> = (0..m).map(|_| rng.next_u64().is_multiple_of(4)).collect();
            let q: Vec<f64> = mask
                .iter()
                .map(|&eq| {
                    if eq {
                        rng.uniform(-50.0, 50.0)
                    } else {
                        rng.uniform(0.0, 100.0)
                    }
                })
                .collect();
            let g: Vec<f64> = (0..m).map(|_| rng.uniform(-20.0, 20.0)).collect();
            let mut s = init_queue_masked(&vec![0.0; m], &mask);
            s.q = q;
            s.lyapunov = 0.5 * linalg::norm_sq(&s.q);
            let c = drift_bound_check(&s, &g, &mask).unwrap();
            assert!(c.holds, "q={:?} g={g:?} slack={}", s.q, c.slack);
        }
    }

    proptest! {
        #[test]
        fn queue_invariants_hold_along_random_paths(
            g0 in prop::collection::vec(-5.0f64..5.0, 1..4),
            steps in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..60),
        ) {
            let m = g0.len();
            let mask = vec![false; m];
            let mut s = init_queue(&g0);
            prop_assert!(norm_dominance_slack(&g0, &s.q, &mask) >= -INVARIANT_TOL);
            for g in &steps {
                let g = &g[..m];
                let check = drift_bound_check(&s, g, &mask).unwrap();
                prop_assert!(check.holds);
                s.update(g, &mask).unwrap();
                prop_assert!(min_queue(&s.q, &mask) >= 0.0);
                prop_assert!(min_multiplier(&s.q, g, &mask) >= 0.0);
                prop_assert!(min_cumulative_slack(&s) >= -INVARIANT_TOL);
                prop_assert!(norm_dominance_slack(&s.q, g, &mask) >= -INVARIANT_TOL);
            }
        }
    }
}
