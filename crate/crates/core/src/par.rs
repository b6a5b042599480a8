//! Execution policy for the data-parallel inner loops.
//!
//! Every parallel loop in the crate computes each output element from a
//! shared read-only snapshot and writes it to its own slot, so the result is
//! bit-identical for any partitioning. Reductions that cross elements are
//! always done sequentially in index order.

use serde::{Deserialize, Serialize};

/// Below this many elements the sequential path is used regardless of policy.
pub const MIN_PARALLEL_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parallelism {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self, len: usize) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel && len >= MIN_PARALLEL_LEN
    }
}

/// Fills `out[i] = f(i)` for every index.
pub fn fill_indexed<F>(policy: Parallelism, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel(out.len()) {
        use rayon::prelude::*;
        out.par_iter_mut()
            .enumerate()
            .with_min_len(64)
            .for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = policy;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Maps `f` over `0..len`, collecting in index order.
pub fn map_indexed<T, F>(policy: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel(len) {
        use rayon::prelude::*;
        return (0..len).into_par_iter().with_min_len(16).map(f).collect();
    }
    let _ = policy;
    (0..len).map(f).collect()
}

/// Maps `f` over `0..len` and returns the first index (lowest) whose key is
/// minimal, skipping `None`. Ties resolve to the smallest index.
pub fn argmin_indexed<F>(policy: Parallelism, len: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    fn better(a: Option<(usize, f64)>, b: Option<(usize, f64)>) -> Option<(usize, f64)> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => {
                if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
        }
    }
    #[cfg(feature = "parallel")]
    if policy.is_parallel(len) {
        use rayon::prelude::*;
        return (0..len)
            .into_par_iter()
            .with_min_len(1024)
            .map(|i| f(i).map(|v| (i, v)))
            .reduce(|| None, better);
    }
    let _ = policy;
    (0..len).map(|i| f(i).map(|v| (i, v))).fold(None, better)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let mut a = vec![0.0; 5000];
        let mut b = vec![0.0; 5000];
        fill_indexed(Parallelism::Sequential, &mut a, f);
        fill_indexed(Parallelism::Parallel, &mut b, f);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn argmin_tie_breaks_to_lowest_index() {
        let key = |i: usize| Some(if i % 1000 == 7 { -1.0 } else { (i % 13) as f64 });
        for policy in [Parallelism::Sequential, Parallelism::Parallel] {
            assert_eq!(argmin_indexed(policy, 100_000, key), Some((7, -1.0)));
        }
        assert_eq!(argmin_indexed(Parallelism::Parallel, 10, |_| None), None);
    }
}
