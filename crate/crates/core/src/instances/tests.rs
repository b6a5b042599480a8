use super::*;
use crate::oracle::grid_solve;
use crate::solvers::{self, Algorithm, SolverConfig};
use proptest::prelude::*;

/// Largest eigenvalue of a symmetric matrix by power iteration.
fn power_iteration(m: &DenseMatrix, shift: f64) -> f64 {
    let n = m.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let mv = m.matvec(crate::par::Parallelism::Sequential, &v);
        let w: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| shift * b - a).collect();
        let norm = linalg::norm(&w);
        lambda = linalg::dot(&v, &w) / linalg::norm_sq(&v);
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda
}

/// Cholesky factorisation of `m + jitter·I`; `None` if a pivot is not positive.
fn cholesky_succeeds(m: &DenseMatrix, jitter: f64) -> bool {
    let n = m.rows();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

#[test]
fn qp1_reference_is_kkt_point() {
    let (p, r) = gen_qp1().unwrap();
    assert_eq!(p.objective_value(&[1.0]), 1.0);
    assert_eq!(p.eval_g(&[1.0]).unwrap(), vec![0.0]);
    assert_eq!((r.f_star, r.lambda_star[0]), (1.0, 2.0));
    // stationarity 2x − λ = 0
    assert_eq!(2.0 * r.x_star[0] - r.lambda_star[0], 0.0);
    let g = grid_solve(&p, 1e-4).unwrap();
    assert!((g.x_star[0] - 1.0).abs() <= 1e-4 + 1e-12);
}

proptest! {
    #[test]
    fn qp1_feasible_points_cost_at_least_one(x in 1.0f64..10.0) {
        let (p, _) = gen_qp1().unwrap();
        prop_assert!(p.max_violation(&[x]) == 0.0);
        prop_assert!(p.objective_value(&[x]) >= 1.0);
    }

    #[test]
    fn ball1_reference_satisfies_kkt(seed in 0u64..500, n in 1usize..6, b in 0.05f64..1.0) {
        let (p, r) = gen_ball1_with(n, seed, b).unwrap();
        r.validate(&p).unwrap();
        // stationarity c + 2λx = 0 with the ball active
        let c = match p.objective().kind() {
            crate::problem::SmoothKind::Linear { coeffs, .. } => coeffs.clone(),
            _ => unreachable!(),
        };
        for i in 0..n {
            prop_assert!((c[i] + 2.0 * r.lambda_star[0] * r.x_star[i]).abs() <= 1e-12 * (1.0 + c[i].abs()));
        }
        prop_assert!((linalg::norm_sq(&r.x_star) - b).abs() <= 1e-12);
        prop_assert!((r.f_star + b.sqrt() * linalg::norm(&c)).abs() <= 1e-12 * (1.0 + r.f_star.abs()));
    }

    #[test]
    fn correlation_matrices_are_valid(n in 2usize..12, seed in 0u64..1000) {
        let m = gen_correlation_matrix(n, seed).unwrap();
        prop_assert!(m.is_symmetric(0.0));
        for i in 0..n {
            prop_assert!((m.get(i, i) - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert!(m.get(i, j).abs() <= 1.0);
            }
        }
        prop_assert!(cholesky_succeeds(&m, 1e-9));
    }
}

#[test]
fn ball1_one_dimensional_example() {
    let (p, r) = ball1_problem(vec![1.0], 0.25).unwrap();
    assert_eq!(r.x_star, vec![-0.5]);
    assert_eq!(r.f_star, -0.5);
    assert_eq!(r.lambda_star, vec![1.0]);
    assert_eq!(p.l_g(), vec![2.0]);
    assert_eq!(p.l_f(), 0.0);
}

#[test]
fn ball1_zero_objective() {
    let (_, r) = ball1_problem(vec![0.0, 0.0], 0.25).unwrap();
    assert_eq!(r.f_star, 0.0);
    assert_eq!(r.lambda_star, vec![0.0]);
}

#[test]
fn ball1_seeded_grid_agrees_with_reference() {
    // 2e-4 keeps the h·β feasibility slack from shifting the optimum by
    // more than 1e-3 (the shift is about λ*·h·β); the scan is restricted to
    // [−√b, √b]², which contains the ball
    let (p, r) = gen_ball1(2, 11).unwrap();
    let half = DEFAULT_BALL_RADIUS_SQ.sqrt();
    let tight = Problem::new(
        "ball1-tight",
        p.objective().clone(),
        SeparableTerm::Zero,
        p.constraints().to_vec(),
        BoxSet::uniform(2, -half, half).unwrap(),
        *p.constants(),
    )
    .unwrap();
    let g = grid_solve(&tight, 2e-4).unwrap();
    assert!(
        (g.f_star - r.f_star).abs() <= 1e-3,
        "{} vs {}",
        g.f_star,
        r.f_star
    );
    assert!((g.f_star - r.f_star).abs() <= g.tolerance);
    let coarse = grid_solve(&p, 1e-3).unwrap();
    assert!(
        (coarse.f_star - r.f_star).abs() <= coarse.tolerance,
        "{coarse:?}"
    );
    assert!(linalg::dist(&g.x_star, &r.x_star) <= 5e-2);
}

#[test]
fn ball1_rejects_ball_outside_box() {
    assert!(ball1_problem(vec![1.0], 1.5).is_err());
}

#[test]
fn correlation_matrix_min_eigenvalue_by_shifted_power_iteration() {
    for (n, seed) in [(5, 1), (10, 2), (20, 3)] {
        let m = gen_correlation_matrix(n, seed).unwrap();
        let top = -power_iteration(&m, 0.0);
        // eigenvalues of top·I − M are top − λ_i; the largest gives λ_min
        let lambda_min = top - power_iteration(&m, top);
        assert!(top > 1.0 && top <= n as f64 + 1e-9);
        assert!(lambda_min >= -1e-9, "n={n}: {lambda_min}");
    }
}

#[test]
fn correlation_matrix_needs_two_assets() {
    assert!(gen_correlation_matrix(1, 0).is_err());
}

#[test]
fn regeneration_is_bit_identical() {
    for d in [
        InstanceDescriptor::new("gmv-l2", 8, 3),
        InstanceDescriptor::new("gmv-l1", 8, 3),
        InstanceDescriptor::new("lasso", 5, 9),
        InstanceDescriptor::new("ball1", 3, 2),
    ] {
        let a = d.build().unwrap();
        let b = d.build().unwrap();
        let x: Vec<f64> = (0..d.n).map(|i| 0.1 * i as f64 - 0.2).collect();
        assert_eq!(
            a.problem.objective_value(&x).to_bits(),
            b.problem.objective_value(&x).to_bits()
        );
        assert_eq!(a.problem.eval_g(&x).unwrap(), b.problem.eval_g(&x).unwrap());
        assert_eq!(a.problem.num_constraints(), d.m());
        let other = InstanceDescriptor {
            seed: d.seed + 1,
            ..d.clone()
        }
        .build()
        .unwrap();
        assert_ne!(
            a.problem.objective_value(&x),
            other.problem.objective_value(&x)
        );
    }
}

#[test]
fn unknown_instance_is_rejected() {
    assert!(InstanceDescriptor::new("nope", 3, 0).build().is_err());
    assert!(InstanceDescriptor::new("qp1", 3, 0).build().is_err());
}

#[test]
fn gmv_l2_small_example_is_feasible() {
    let p = gen_gmv_l2(3, 0).unwrap();
    let x = [1.0 / 3.0; 3];
    assert!(p.max_violation(&x) <= 1e-15);
    let g = p.eval_g(&x).unwrap();
    assert!(g[0].abs() <= 1e-15 && (g[1] - (1.0 / 3.0 - 1.0)).abs() <= 1e-15);
}

#[test]
fn gmv_defaults_follow_paper_scale_setting() {
    // paper setting for both experiments: n = 500, b = 3/n
    let n = 500;
    let d = InstanceDescriptor::new("gmv-l2", n, 1);
    let p = d.build().unwrap().problem;
    let g = p.eval_g(&vec![0.0; n]).unwrap();
    assert_eq!(g[1], -3.0 / n as f64);
    let p = gen_gmv_l1(n, 1, 3.0 / n as f64, false).unwrap();
    let g = p.eval_g(&vec![0.0; n]).unwrap();
    assert_eq!(g[1], -3.0 / n as f64);
}

#[test]
fn gmv_l1_unit_vector_is_feasible() {
    let p = gen_gmv_l1(6, 4, 1.0, false).unwrap();
    let mut x = vec![0.0; 6];
    x[0] = 1.0;
    assert_eq!(p.max_violation(&x), 0.0);
    assert_eq!(p.objective_value(&x), 1.0);
}

#[test]
fn generated_constants_pass_their_checks() {
    let cases = [
        InstanceDescriptor::new("qp1", 1, 0),
        InstanceDescriptor::new("ball1", 3, 1),
        InstanceDescriptor::new("gmv-l2", 10, 2),
        InstanceDescriptor::new("gmv-l1", 10, 3),
        InstanceDescriptor::new("lasso", 4, 4),
    ];
    for d in cases {
        let p = d.build().unwrap().problem;
        let consts = *p.constants();
        let est = p.lipschitz_estimate(40, 17).unwrap();
        assert!(
            est <= consts.beta * (1.0 + 1e-9),
            "{}: {est} > {}",
            d.name,
            consts.beta
        );
        assert!(
            p.bounds().diameter() <= consts.radius.unwrap() * (1.0 + 1e-12),
            "{}",
            d.name
        );
        let c = consts.c_bound.unwrap();
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..p.dim())
                .map(|i| rng.uniform(p.bounds().lower()[i], p.bounds().upper()[i]))
                .collect();
            assert!(linalg::norm(&p.eval_g(&x).unwrap()) <= c, "{}", d.name);
        }
        // corners maximise |G| for these instances
        let lo = p.bounds().lower().to_vec();
        let hi = p.bounds().upper().to_vec();
        for x in [lo, hi] {
            assert!(
                linalg::norm(&p.eval_g(&x).unwrap()) <= c * (1.0 + 1e-12),
                "{}",
                d.name
            );
        }
    }
}

#[test]
fn gmv_l1_small_instance_matches_budget_grid() {
    // Grid over (x1, x2, x3) with x4 = 1 − x1 − x2 − x3 on the budget
    // hyperplane, where the relaxed optimum lies, filtered by ‖x‖₁ ≤ b.
    let b = 2.0;
    let p = gen_gmv_l1(4, 21, b, false).unwrap();
    let h = 1e-2;
    let steps = (2.0 * b / h).round() as usize + 1;
    let total = steps * steps * steps;
    let coord = |j: usize| -b + j as f64 * h;
    let best = crate::par::argmin_indexed(crate::par::Parallelism::Parallel, total, |idx| {
        let (i, j, k) = (idx / (steps * steps), (idx / steps) % steps, idx % steps);
        let x = [
            coord(i),
            coord(j),
            coord(k),
            1.0 - coord(i) - coord(j) - coord(k),
        ];
        (linalg::l1_norm(&x) <= b).then(|| p.objective_value(&x))
    })
    .unwrap();
    let cfg = SolverConfig {
        max_iters: 200_000,
        stride: 200_000,
        ..SolverConfig::default()
    };
    let run = solvers::run(&p, Algorithm::NewConstant, &cfg).unwrap();
    let f = p.objective_value(&run.x_bar);
    assert!(p.max_violation(&run.x_bar) <= 1e-3);
    assert!(
        (f - best.1).abs() <= 2e-3 * (1.0 + best.1.abs()),
        "solver {f} vs grid {}",
        best.1
    );
}

#[test]
fn lasso_origin_objective_is_squared_observation_norm() {
    let data = lasso_data(7, 4, 3).unwrap();
    let p = lasso_problem(&data, 0.5, 2.0).unwrap();
    let expect = linalg::norm_sq(&data.observations);
    assert!((p.objective_value(&[0.0; 4]) - expect).abs() <= 1e-12 * expect);
    assert_eq!(data.truth.iter().filter(|v| **v != 0.0).count(), 1);
}

#[test]
fn lasso_without_penalty_recovers_least_squares() {
    let data = lasso_data(8, 3, 12).unwrap();
    // constraints coincide with the box, so they never bind in the interior
    let p = lasso_problem(&data, 0.0, LASSO_BOX).unwrap();
    let a = &data.design;
    let ata = a.gram(crate::par::Parallelism::Sequential).to_rows();
    let aty = a.transpose_matvec(&data.observations);
    let ls = linalg::solve_dense(ata, aty).unwrap();
    assert!(ls.iter().all(|v| v.abs() < LASSO_BOX));
    let cfg = SolverConfig {
        max_iters: 200_000,
        stride: 200_000,
        ..SolverConfig::default()
    };
    let run = solvers::run(&p, Algorithm::NewConstant, &cfg).unwrap();
    assert!(linalg::dist(&run.x, &ls) <= 1e-6, "{:?} vs {ls:?}", run.x);
}

#[test]
fn lasso_tiny_instance_matches_grid() {
    // Coarse grid over the feasible cube, then a 1e-3 grid around the
    // coarse minimiser (the objective is convex, so the fine window
    // contains the minimiser once the coarse cell is located).
    let data = lasso_data(6, 3, 5).unwrap();
    let u = 1.0;
    let p = lasso_problem(&data, 0.3, u).unwrap();
    let restricted = |lo: &[f64], hi: &[f64]| {
        Problem::new(
            "lasso-window",
            p.objective().clone(),
            p.objective_separable().clone(),
            p.constraints().to_vec(),
            BoxSet::new(lo.to_vec(), hi.to_vec()).unwrap(),
            *p.constants(),
        )
        .unwrap()
    };
    let coarse = grid_solve(&restricted(&[-u; 3], &[u; 3]), 1e-2).unwrap();
    let lo: Vec<f64> = coarse.x_star.iter().map(|v| (v - 0.05).max(-u)).collect();
    let hi: Vec<f64> = coarse.x_star.iter().map(|v| (v + 0.05).min(u)).collect();
    let fine = grid_solve(&restricted(&lo, &hi), 1e-3).unwrap();
    let cfg = SolverConfig {
        max_iters: 100_000,
        stride: 100_000,
        ..SolverConfig::default()
    };
    let run = solvers::run(&p, Algorithm::NewConstant, &cfg).unwrap();
    let f = p.objective_value(&run.x_bar);
    assert!(p.max_violation(&run.x_bar) <= 1e-3);
    assert!(
        (f - fine.f_star).abs() <= fine.tolerance.max(1e-3),
        "solver {f} vs grid {}",
        fine.f_star
    );
}

#[test]
fn export_writes_toml_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let inst = InstanceDescriptor::new("gmv-l2", 4, 1).build().unwrap();
    let files = inst.export(dir.path(), "gmv").unwrap();
    assert!(files.iter().any(|f| f.extension().unwrap() == "csv"));
    let back = crate::problem::config::load_problem(&dir.path().join("gmv.toml")).unwrap();
    let x = [0.1, 0.2, 0.3, 0.4];
    assert_eq!(
        back.objective_value(&x).to_bits(),
        inst.problem.objective_value(&x).to_bits()
    );
    assert_eq!(back.eval_g(&x).unwrap(), inst.problem.eval_g(&x).unwrap());
}
