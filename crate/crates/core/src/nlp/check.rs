//! Finite-difference audit of the analytic derivative callbacks.

use super::NlpProblem;

const FD_STEP: f64 = 1e-6;
const REL_FLOOR: f64 = 1e-8;

/// Compares the objective gradient and both constraint Jacobians against
/// central finite differences (step 1e-6) and returns the maximum relative
/// error. Errors are measured per column relative to the larger of the
/// analytic and differenced column max-norms, with an absolute floor of 1e-8.
pub fn check_derivatives(problem: &NlpProblem, x: &[f64]) -> f64 {
    let n = problem.num_vars;
    assert_eq!(x.len(), n);
    let mut worst: f64 = 0.0;

    // Objective gradient.
    {
        let mut grad = vec![0.0; n];
        problem.objective.value_grad(x, &mut grad);
        let mut xp = x.to_vec();
        let mut fd = vec![0.0; n];
        for j in 0..n {
            let h = FD_STEP * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            let fp = problem.objective.value(&xp);
            xp[j] = x[j] - h;
            let fm = problem.objective.value(&xp);
            xp[j] = x[j];
            fd[j] = (fp - fm) / (2.0 * h);
        }
        let scale = grad
            .iter()
            .chain(fd.iter())
            .fold(REL_FLOOR, |a, v| a.max(v.abs()));
        for j in 0..n {
            worst = worst.max((grad[j] - fd[j]).abs() / scale);
        }
    }

    for set in [&problem.equalities, &problem.inequalities] {
        let m = set.dim();
        if m == 0 {
            continue;
        }
        let sp = set.sparsity();
        let mut vals = vec![0.0; sp.len()];
        set.jacobian_values(x, &mut vals);
        // Column -> entry index map.
        let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &c) in sp.cols.iter().enumerate() {
            by_col[c].push(k);
        }
        let mut xp = x.to_vec();
        let mut cp = vec![0.0; m];
        let mut cm = vec![0.0; m];
        let mut analytic_col = vec![0.0; m];
        for j in 0..n {
            let h = FD_STEP * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            set.eval(&xp, &mut cp);
            xp[j] = x[j] - h;
            set.eval(&xp, &mut cm);
            xp[j] = x[j];

            for v in analytic_col.iter_mut() {
                *v = 0.0;
            }
            for &k in &by_col[j] {
                analytic_col[sp.rows[k]] += vals[k];
            }
            let mut scale = REL_FLOOR;
            for i in 0..m {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                cp[i] = fd; // reuse as fd storage
                scale = scale.max(fd.abs()).max(analytic_col[i].abs());
            }
            for i in 0..m {
                worst = worst.max((analytic_col[i] - cp[i]).abs() / scale);
            }
        }
    }
    worst
}
