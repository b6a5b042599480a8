use std::sync::Arc;

use vqpd::instances::{gen_constrained_lasso, gen_gmv_l1, gen_gmv_l2};
use vqpd::linalg::DenseMatrix;
use vqpd::oracle::grid_solve;
use vqpd::problem::{AbsTerm, PositivePart, ScalarConvex};
use vqpd::solvers::{run, Algorithm, SolverConfig};
use vqpd::trace::write_trace;
use vqpd::{BoxSet, Constants, Constraint, Parallelism, Problem, SeparableTerm, SmoothOracle};

fn trace_bytes(p: &Problem, alg: Algorithm, iters: u64) -> Vec<u8> {
    let cfg = SolverConfig {
        max_iters: iters,
        ..SolverConfig::default()
    };
    let out = run(p, alg, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &out.trace).unwrap();
    buf
}

/// Large enough that the coordinate sweeps and mat-vecs take the rayon path.
fn wide_problems() -> Vec<Problem> {
    vec![
        gen_gmv_l2(300, 11).unwrap(),
        gen_gmv_l1(300, 11, 2.0, false).unwrap(),
        gen_constrained_lasso(400, 300, 11, 1.0, 2.0).unwrap(),
    ]
}

#[test]
fn parallel_and_sequential_traces_are_identical() {
    for p in wide_problems() {
        for alg in Algorithm::ALL {
            let par = trace_bytes(&p.clone().with_parallelism(Parallelism::Parallel), alg, 30);
            let seq = trace_bytes(
                &p.clone().with_parallelism(Parallelism::Sequential),
                alg,
                30,
            );
            assert!(par == seq, "{} {alg}", p.name);
        }
    }
}

#[cfg(feature = "parallel")]
#[test]
fn traces_do_not_depend_on_thread_count() {
    let p = gen_gmv_l1(300, 5, 2.0, false).unwrap();
    let with_threads = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| trace_bytes(&p, Algorithm::NewAdaptive, 50))
    };
    let one = with_threads(1);
    assert_eq!(one, with_threads(3));
    assert_eq!(one, with_threads(8));
}

/// `‖x − (1, 1)‖² + ½·max(0, x₁ − 0.2) + 0.3·|x₂|` s.t. `x₁ + x₂ ≤ 1` on
/// `[−2, 2]²`: the first separable term has no closed-form kernel.
fn custom_problem() -> Problem {
    let table: Vec<Arc<dyn ScalarConvex>> = vec![
        Arc::new(PositivePart {
            weight: 0.5,
            shift: 0.2,
        }),
        Arc::new(AbsTerm { weight: 0.3 }),
    ];
    Problem::new(
        "custom",
        SmoothOracle::quadratic(DenseMatrix::identity(2), vec![-2.0, -2.0], 2.0).unwrap(),
        SeparableTerm::custom(table),
        vec![Constraint::smooth(SmoothOracle::linear(
            vec![1.0, 1.0],
            -1.0,
        ))],
        BoxSet::uniform(2, -2.0, 2.0).unwrap(),
        Constants {
            beta: 2f64.sqrt(),
            c_bound: Some(5.0),
            radius: Some(4.0 * 2f64.sqrt()),
        },
    )
    .unwrap()
}

#[test]
fn bisection_kernel_solves_custom_separable_problem() {
    let p = custom_problem();
    let grid = grid_solve(&p, 1e-3).unwrap();
    for alg in [
        Algorithm::NewConstant,
        Algorithm::NewAdaptive,
        Algorithm::YuNeely,
    ] {
        let cfg = SolverConfig {
            max_iters: 20_000,
            stride: 1000,
            ..SolverConfig::default()
        };
        let out = run(&p, alg, &cfg).unwrap();
        let f = p.objective_value(&out.x_bar);
        let v = p.max_violation(&out.x_bar);
        assert!(v <= 1e-3, "{alg}: violation {v}");
        assert!(
            (f - grid.f_star).abs() <= grid.tolerance + 1e-3,
            "{alg}: F {f} vs grid {} ± {}",
            grid.f_star,
            grid.tolerance
        );
    }
}
