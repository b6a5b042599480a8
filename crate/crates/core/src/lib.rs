//! Virtual-queue primal-dual solvers for constrained composite convex
//! programs
//!
//! ```text
//! min  f(x) + f̃(x)   s.t.  g_k(x) + g̃_k(x) ≤ 0,  x ∈ box
//! ```
//!
//! where `f`, `g_k` are smooth and `f̃`, `g̃_k` are separable. The main solver
//! linearises the smooth parts around the previous iterate, so each iteration
//! reduces to independent scalar problems, one per coordinate, with a closed
//! form when the nonsmooth parts are weighted l1 norms.

// `!(a <= b)` is used on purpose so that NaN fails the comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod instances;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod par;
pub mod problem;
pub mod queue;
pub mod rng;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use par::Parallelism;
pub use problem::{BoxSet, Constants, Constraint, Problem, SeparableTerm, SmoothOracle};
