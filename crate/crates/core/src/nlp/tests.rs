use super::test_util::{DenseConstraints, FnObjective};
use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_bounds(n: usize) -> Vec<(f64, f64)> {
    vec![(-1e20, 1e20); n]
}

/// min x^2  s.t.  x >= 1  (as a general inequality, not a bound).
fn toy_bound_problem() -> NlpProblem {
    NlpProblem {
        num_vars: 1,
        bounds: free_bounds(1),
        objective: Box::new(FnObjective {
            f: |x: &[f64]| x[0] * x[0],
            grad: |x: &[f64], g: &mut [f64]| g[0] = 2.0 * x[0],
        }),
        equalities: Box::new(NoConstraints::new()),
        inequalities: Box::new(DenseConstraints::new(
            1,
            1,
            |x: &[f64], out: &mut [f64]| out[0] = x[0] - 1.0,
            |_x: &[f64], j: &mut [f64]| j[0] = 1.0,
        )),
    }
}

#[test]
fn quadratic_with_inequality_kkt_by_hand() {
    let problem = toy_bound_problem();
    let cfg = SolverConfig {
        kkt_tol: 1e-8,
        ..Default::default()
    };
    let sol = solve(&problem, &[3.0], &cfg);
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!((sol.x[0] - 1.0).abs() < 1e-6, "x = {}", sol.x[0]);
    assert!(
        (sol.ineq_multipliers[0] - 2.0).abs() < 1e-6,
        "mu = {}",
        sol.ineq_multipliers[0]
    );
    assert!(sol.ineq_multipliers.iter().all(|&m| m >= 0.0));
}

#[test]
fn unconstrained_quadratic() {
    let problem = NlpProblem {
        num_vars: 2,
        bounds: free_bounds(2),
        objective: Box::new(FnObjective {
            f: |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
            grad: |x: &[f64], g: &mut [f64]| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 2.0 * (x[1] + 1.0);
            },
        }),
        equalities: Box::new(NoConstraints::new()),
        inequalities: Box::new(NoConstraints::new()),
    };
    let sol = solve(&problem, &[0.0, 0.0], &SolverConfig::default());
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!((sol.x[0] - 3.0).abs() < 1e-6 && (sol.x[1] + 1.0).abs() < 1e-6);
}

/// min (x-1)^2  s.t.  x*y = 0, x >= 0, y >= 0 (bounds).
#[test]
fn toy_complementarity() {
    let problem = NlpProblem {
        num_vars: 2,
        bounds: vec![(0.0, 1e20), (0.0, 1e20)],
        objective: Box::new(FnObjective {
            f: |x: &[f64]| (x[0] - 1.0).powi(2),
            grad: |x: &[f64], g: &mut [f64]| {
                g[0] = 2.0 * (x[0] - 1.0);
                g[1] = 0.0;
            },
        }),
        equalities: Box::new(DenseConstraints::new(
            1,
            2,
            |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[1],
            |x: &[f64], j: &mut [f64]| {
                j[0] = x[1];
                j[1] = x[0];
            },
        )),
        inequalities: Box::new(NoConstraints::new()),
    };

    // Grid-search oracle over the feasible set (one factor must vanish).
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=3000 {
        let t = i as f64 * 1e-3;
        let on_axis_x = (t - 1.0).powi(2); // y = 0, x = t
        if on_axis_x < best.0 {
            best = (on_axis_x, t, 0.0);
        }
        let on_axis_y = (0.0f64 - 1.0).powi(2); // x = 0, y = t
        if on_axis_y < best.0 {
            best = (on_axis_y, 0.0, t);
        }
    }
    assert_eq!(best.1, 1.0);
    assert_eq!(best.2, 0.0);

    let sol = solve(&problem, &[0.5, 0.5], &SolverConfig::default());
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!((sol.x[0] - best.1).abs() < 1e-4, "{:?}", sol.x);
    assert!(sol.x[1].abs() < 1e-4, "{:?}", sol.x);
}

#[test]
fn kkt_residual_zero_at_exact_point() {
    let problem = toy_bound_problem();
    let r = kkt_residual(&problem, &[1.0], &[], &[2.0]);
    assert!(r <= 1e-10, "residual {r}");
}

#[test]
fn kkt_residual_grows_monotonically() {
    let problem = toy_bound_problem();
    let mut prev = 0.0;
    for k in 1..=8 {
        let eps = 1e-4 * (4.0f64).powi(k);
        // Perturb along the objective gradient direction.
        let r = kkt_residual(&problem, &[1.0 + eps], &[], &[2.0]);
        assert!(r > prev, "eps {eps}: {r} <= {prev}");
        prev = r;
    }
}

#[test]
fn kkt_residual_matches_hand_formula() {
    let problem = toy_bound_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let x: f64 = rng.gen_range(-2.0..3.0);
        let mu: f64 = rng.gen_range(0.0..4.0);
        let stat = (2.0 * x - mu).abs();
        let primal = (1.0 - x).max(0.0);
        let comp = (mu * (x - 1.0)).abs();
        let expected = stat.max(primal).max(comp);
        let got = kkt_residual(&problem, &[x], &[], &[mu]);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }
}

#[test]
fn derivative_check_clean_quadratic() {
    let problem = NlpProblem {
        num_vars: 3,
        bounds: free_bounds(3),
        objective: Box::new(FnObjective {
            f: |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>(),
            grad: |x: &[f64], g: &mut [f64]| {
                for i in 0..3 {
                    g[i] = 2.0 * x[i];
                }
            },
        }),
        equalities: Box::new(DenseConstraints::new(
            2,
            3,
            |x: &[f64], out: &mut [f64]| {
                out[0] = x[0] * x[1] - 1.0;
                out[1] = x[2].sin();
            },
            |x: &[f64], j: &mut [f64]| {
                j[0] = x[1];
                j[1] = x[0];
                j[2] = 0.0;
                j[3] = 0.0;
                j[4] = 0.0;
                j[5] = x[2].cos();
            },
        )),
        inequalities: Box::new(NoConstraints::new()),
    };
    let err = check_derivatives(&problem, &[0.7, -1.3, 0.4]);
    assert!(err <= 1e-7, "error {err}");
}

#[test]
fn derivative_check_flags_zeroed_entry() {
    // Same constraints but with d c0 / d x1 zeroed out (true value x0 = 0.9).
    let problem = NlpProblem {
        num_vars: 2,
        bounds: free_bounds(2),
        objective: Box::new(FnObjective {
            f: |_x: &[f64]| 0.0,
            grad: |_x: &[f64], g: &mut [f64]| g.fill(0.0),
        }),
        equalities: Box::new(DenseConstraints::new(
            1,
            2,
            |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[1],
            |x: &[f64], j: &mut [f64]| {
                j[0] = x[1];
                j[1] = 0.0; // should be x[0] = 0.9
            },
        )),
        inequalities: Box::new(NoConstraints::new()),
    };
    let err = check_derivatives(&problem, &[0.9, 0.4]);
    // Column x1 has a single entry of magnitude 0.9; the relative error
    // must be at least that magnitude over the column scale (= 1).
    assert!(err >= 0.89, "error {err}");
}

/// Active-set oracle for a dense QP: min 1/2 x^T Q x + c^T x s.t. A x >= b.
fn qp_oracle(q: &nalgebra::DMatrix<f64>, c: &nalgebra::DVector<f64>, a: &nalgebra::DMatrix<f64>, b: &nalgebra::DVector<f64>) -> Option<nalgebra::DVector<f64>> {
    use nalgebra::{DMatrix, DVector};
    let n = q.nrows();
    let m = a.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let na = active.len();
        if na > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + na, n + na);
        kkt.view_mut((0, 0), (n, n)).copy_from(q);
        for (row, &ci) in active.iter().enumerate() {
            for col in 0..n {
                kkt[(n + row, col)] = a[(ci, col)];
                kkt[(col, n + row)] = -a[(ci, col)];
            }
        }
        let mut rhs = DVector::zeros(n + na);
        for i in 0..n {
            rhs[i] = -c[i];
        }
        for (row, &ci) in active.iter().enumerate() {
            rhs[n + row] = b[ci];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let mu = sol.rows(n, na);
        if mu.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let slack = a * &x - b;
        if slack.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let obj = 0.5 * (&x.transpose() * q * &x)[(0, 0)] + c.dot(&x);
        if best.as_ref().map_or(true, |(bv, _)| obj < *bv - 1e-12) {
            best = Some((obj, x));
        }
    }
    best.map(|(_, x)| x)
}

#[test]
fn random_convex_qps_match_active_set_oracle() {
    use nalgebra::{DMatrix, DVector};
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..10 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let m = 3;
        // SPD Q = B^T B + I.
        let b_mat = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = &b_mat.transpose() * &b_mat + DMatrix::identity(n, n);
        let c = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.5..0.5));
        let Some(x_star) = qp_oracle(&q, &c, &a, &b) else {
            continue;
        };

        let (qc, cc, ac, bc) = (q.clone(), c.clone(), a.clone(), b.clone());
        let (qg, cg) = (q.clone(), c.clone());
        let (aj, bj) = (a.clone(), b.clone());
        let problem = NlpProblem {
            num_vars: n,
            bounds: free_bounds(n),
            objective: Box::new(FnObjective {
                f: move |x: &[f64]| {
                    let xv = DVector::from_column_slice(x);
                    0.5 * (&xv.transpose() * &qc * &xv)[(0, 0)] + cc.dot(&xv)
                },
                grad: move |x: &[f64], g: &mut [f64]| {
                    let xv = DVector::from_column_slice(x);
                    let gv = &qg * &xv + &cg;
                    g.copy_from_slice(gv.as_slice());
                },
            }),
            equalities: Box::new(NoConstraints::new()),
            inequalities: Box::new(DenseConstraints::new(
                m,
                n,
                move |x: &[f64], out: &mut [f64]| {
                    let xv = DVector::from_column_slice(x);
                    let s = &ac * &xv - &bc;
                    out.copy_from_slice(s.as_slice());
                },
                move |_x: &[f64], j: &mut [f64]| {
                    for r in 0..m {
                        for col in 0..aj.ncols() {
                            j[r * aj.ncols() + col] = aj[(r, col)];
                        }
                    }
                    let _ = &bj;
                },
            )),
        };
        let cfg = SolverConfig {
            kkt_tol: 1e-7,
            ..Default::default()
        };
        let sol = solve(&problem, &vec![0.0; n], &cfg);
        assert_eq!(sol.status, SolveStatus::Converged, "trial {trial}");
        for i in 0..n {
            assert!(
                (sol.x[i] - x_star[i]).abs() < 1e-5,
                "trial {trial}: {:?} vs oracle {:?}",
                sol.x,
                x_star
            );
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let run = || {
        let problem = toy_bound_problem();
        solve(&problem, &[2.5], &SolverConfig::default())
    };
    let a = run();
    let b = run();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.kkt_residual, b.kkt_residual);
}

#[test]
fn converged_solution_replays() {
    let problem = toy_bound_problem();
    let sol = solve(&problem, &[2.0], &SolverConfig::default());
    assert_eq!(sol.status, SolveStatus::Converged);
    let replayed = kkt_residual(&problem, &sol.x, &sol.eq_multipliers, &sol.ineq_multipliers);
    assert!((replayed - sol.kkt_residual).abs() <= 1e-12);
}
