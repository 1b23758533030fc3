//! Sparse nonlinear programming: problem representation and an
//! augmented-Lagrangian solver with a bound-projected L-BFGS inner loop.
//!
//! Problems have the form
//!
//! ```text
//!   min f(x)   s.t.   c(x) = 0,   g(x) >= 0,   lo <= x <= hi
//! ```
//!
//! Inequalities are folded into the augmented Lagrangian through their slack
//! formulation `g(x) - s = 0, s >= 0`, with the slack minimized in closed
//! form (the Powell-Hestenes-Rockafellar term); the multiplier update is the
//! same single rule as for equalities. All derivative callbacks are analytic
//! and can be audited against central finite differences with
//! [`check_derivatives`].

mod check;
mod newton;

pub use check::check_derivatives;

/// Fixed sparsity pattern of a constraint Jacobian, COO layout.
/// `rows[k]`/`cols[k]` index constraint and variable of the k-th entry.
#[derive(Debug, Clone, Default)]
pub struct Sparsity {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Sparsity {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: usize, col: usize) {
        self.rows.push(row);
        self.cols.push(col);
    }
}

/// Objective with analytic gradient.
pub trait Objective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Optional diagonal curvature estimate for the inner solver's Hessian
    /// model; return false to leave the solver on its scalar damping.
    fn curvature_diag(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// A family of constraints with an analytic sparse Jacobian.
pub trait ConstraintSet: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Writes Jacobian values aligned with `sparsity()`.
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]);
    fn sparsity(&self) -> &Sparsity;
}

/// Constraint set with no rows.
pub struct NoConstraints {
    sparsity: Sparsity,
}

impl NoConstraints {
    pub fn new() -> Self {
        Self {
            sparsity: Sparsity::default(),
        }
    }
}

impl Default for NoConstraints {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstraintSet for NoConstraints {
    fn dim(&self) -> usize {
        0
    }
    fn eval(&self, _x: &[f64], _out: &mut [f64]) {}
    fn jacobian_values(&self, _x: &[f64], _out: &mut [f64]) {}
    fn sparsity(&self) -> &Sparsity {
        &self.sparsity
    }
}

/// The abstract problem handed to [`solve`].
pub struct NlpProblem {
    pub num_vars: usize,
    /// Per-variable `[lo, hi]`; use +-1e20 for unbounded.
    pub bounds: Vec<(f64, f64)>,
    pub objective: Box<dyn Objective>,
    pub equalities: Box<dyn ConstraintSet>,
    /// Convention `g(x) >= 0`.
    pub inequalities: Box<dyn ConstraintSet>,
}

impl NlpProblem {
    pub fn validate(&self) -> Result<(), String> {
        if self.bounds.len() != self.num_vars {
            return Err(format!(
                "bounds length {} != num_vars {}",
                self.bounds.len(),
                self.num_vars
            ));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi {
                return Err(format!("bounds[{i}]: lo {lo} > hi {hi}"));
            }
        }
        for (name, set) in [("eq", &self.equalities), ("ineq", &self.inequalities)] {
            let sp = set.sparsity();
            if sp.rows.len() != sp.cols.len() {
                return Err(format!("{name} sparsity rows/cols length mismatch"));
            }
            if sp.rows.iter().any(|&r| r >= set.dim()) {
                return Err(format!("{name} sparsity row out of range"));
            }
            if sp.cols.iter().any(|&c| c >= self.num_vars) {
                return Err(format!("{name} sparsity col out of range"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Max-norm KKT tolerance declaring convergence.
    pub kkt_tol: f64,
    /// Augmented-Lagrangian (multiplier/penalty) iterations.
    pub max_outer_iters: usize,
    /// L-BFGS iterations per outer iteration.
    pub max_inner_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Audit callbacks against finite differences at x0 before solving.
    pub finite_diff_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-4,
            max_outer_iters: 60,
            max_inner_iters: 1500,
            penalty_init: 100.0,
            penalty_growth: 10.0,
            finite_diff_check: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kkt_tol > 0.0) {
            return Err("kkt_tol must be positive".into());
        }
        if !(self.penalty_growth > 1.0) {
            return Err("penalty_growth must exceed 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Nonnegative multipliers for `g(x) >= 0`.
    pub ineq_multipliers: Vec<f64>,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Total inner (L-BFGS) iterations spent.
    pub iterations: usize,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Scatter `J^T w` into `grad` (+=).
fn add_jt_w(sparsity: &Sparsity, vals: &[f64], w: &[f64], grad: &mut [f64]) {
    for k in 0..sparsity.rows.len() {
        grad[sparsity.cols[k]] += vals[k] * w[sparsity.rows[k]];
    }
}

/// Workspace for augmented-Lagrangian evaluations; reused across iterations.
struct AlWorkspace {
    ceq: Vec<f64>,
    cineq: Vec<f64>,
    jeq: Vec<f64>,
    jineq: Vec<f64>,
    weq: Vec<f64>,
    wineq: Vec<f64>,
}

struct AlEval<'a> {
    problem: &'a NlpProblem,
    lambda_eq: Vec<f64>,
    lambda_ineq: Vec<f64>,
    rho: f64,
}

impl AlEval<'_> {
    /// Augmented Lagrangian value only (used in line searches).
    fn value(&self, x: &[f64], ws: &mut AlWorkspace) -> f64 {
        let mut v = self.problem.objective.value(x);
        self.problem.equalities.eval(x, &mut ws.ceq);
        self.problem.inequalities.eval(x, &mut ws.cineq);
        for (c, l) in ws.ceq.iter().zip(&self.lambda_eq) {
            v += l * c + 0.5 * self.rho * c * c;
        }
        for (g, l) in ws.cineq.iter().zip(&self.lambda_ineq) {
            let t = (l - self.rho * g).max(0.0);
            v += (t * t - l * l) / (2.0 * self.rho);
        }
        v
    }

    /// Value and gradient.
    fn value_grad(&self, x: &[f64], grad: &mut [f64], ws: &mut AlWorkspace) -> f64 {
        let mut v = self.problem.objective.value_grad(x, grad);
        self.problem.equalities.eval(x, &mut ws.ceq);
        self.problem.inequalities.eval(x, &mut ws.cineq);
        self.problem.equalities.jacobian_values(x, &mut ws.jeq);
        self.problem.inequalities.jacobian_values(x, &mut ws.jineq);
        for i in 0..ws.ceq.len() {
            let c = ws.ceq[i];
            let l = self.lambda_eq[i];
            v += l * c + 0.5 * self.rho * c * c;
            ws.weq[i] = l + self.rho * c;
        }
        for i in 0..ws.cineq.len() {
            let g = ws.cineq[i];
            let l = self.lambda_ineq[i];
            let t = (l - self.rho * g).max(0.0);
            v += (t * t - l * l) / (2.0 * self.rho);
            ws.wineq[i] = -t;
        }
        add_jt_w(self.problem.equalities.sparsity(), &ws.jeq, &ws.weq, grad);
        add_jt_w(self.problem.inequalities.sparsity(), &ws.jineq, &ws.wineq, grad);
        v
    }
}

/// Max-norm KKT residual at `(x, multipliers)`: the largest of stationarity
/// (projected-gradient of the Lagrangian), primal feasibility, and
/// complementary slackness `|mu_j g_j|`.
pub fn kkt_residual(
    problem: &NlpProblem,
    x: &[f64],
    eq_multipliers: &[f64],
    ineq_multipliers: &[f64],
) -> f64 {
    let n = problem.num_vars;
    let me = problem.equalities.dim();
    let mi = problem.inequalities.dim();
    let mut grad = vec![0.0; n];
    problem.objective.value_grad(x, &mut grad);
    let mut ceq = vec![0.0; me];
    let mut cineq = vec![0.0; mi];
    problem.equalities.eval(x, &mut ceq);
    problem.inequalities.eval(x, &mut cineq);
    let mut jeq = vec![0.0; problem.equalities.sparsity().len()];
    let mut jineq = vec![0.0; problem.inequalities.sparsity().len()];
    problem.equalities.jacobian_values(x, &mut jeq);
    problem.inequalities.jacobian_values(x, &mut jineq);

    // grad L = grad f + Jeq^T lambda - Jineq^T mu
    add_jt_w(problem.equalities.sparsity(), &jeq, eq_multipliers, &mut grad);
    let neg_mu: Vec<f64> = ineq_multipliers.iter().map(|m| -m).collect();
    add_jt_w(problem.inequalities.sparsity(), &jineq, &neg_mu, &mut grad);

    let mut stat: f64 = 0.0;
    for i in 0..n {
        let (lo, hi) = problem.bounds[i];
        let step = (x[i] - grad[i]).clamp(lo, hi) - x[i];
        stat = stat.max(step.abs());
    }
    let mut primal: f64 = 0.0;
    for c in &ceq {
        primal = primal.max(c.abs());
    }
    for g in &cineq {
        primal = primal.max(-g.min(0.0));
    }
    let mut comp: f64 = 0.0;
    for (g, m) in cineq.iter().zip(ineq_multipliers) {
        comp = comp.max((g * m).abs());
    }
    stat.max(primal).max(comp)
}

/// Solve the problem starting from `x0` (projected into bounds if outside).
pub fn solve(problem: &NlpProblem, x0: &[f64], cfg: &SolverConfig) -> NlpSolution {
    let eq = vec![0.0; problem.equalities.dim()];
    let ineq = vec![0.0; problem.inequalities.dim()];
    solve_warm(problem, x0, cfg, &eq, &ineq)
}

/// [`solve`] with warm-started multipliers (used by homotopy continuation).
pub fn solve_warm(
    problem: &NlpProblem,
    x0: &[f64],
    cfg: &SolverConfig,
    eq_multipliers: &[f64],
    ineq_multipliers: &[f64],
) -> NlpSolution {
    assert_eq!(x0.len(), problem.num_vars, "x0 length mismatch");
    problem.validate().expect("invalid NLP problem");
    cfg.validate().expect("invalid solver config");
    if cfg.finite_diff_check {
        let err = check_derivatives(problem, x0);
        log::debug!("derivative check at x0: max relative error {err:.3e}");
    }

    let me = problem.equalities.dim();
    let mi = problem.inequalities.dim();
    let mut ws = AlWorkspace {
        ceq: vec![0.0; me],
        cineq: vec![0.0; mi],
        jeq: vec![0.0; problem.equalities.sparsity().len()],
        jineq: vec![0.0; problem.inequalities.sparsity().len()],
        weq: vec![0.0; me],
        wineq: vec![0.0; mi],
    };

    let mut x = x0.to_vec();
    project(&mut x, &problem.bounds);

    assert_eq!(eq_multipliers.len(), me);
    assert_eq!(ineq_multipliers.len(), mi);
    let mut al = AlEval {
        problem,
        lambda_eq: eq_multipliers.to_vec(),
        lambda_ineq: ineq_multipliers.iter().map(|l| l.max(0.0)).collect(),
        rho: cfg.penalty_init,
    };

    let mut inner_total = 0usize;
    let mut prev_feas = f64::INFINITY;
    let inner_tol = (cfg.kkt_tol * 0.3).max(1e-9);
    let mut inner = newton::ProjectedNewton::new(
        problem.num_vars,
        problem.equalities.sparsity(),
        problem.inequalities.sparsity(),
        me,
        mi,
    );
    let mut jeq_vals = vec![0.0; problem.equalities.sparsity().len()];
    let mut jineq_vals = vec![0.0; problem.inequalities.sparsity().len()];
    let mut ineq_active = vec![false; mi];
    let mut jac_scratch = vec![0.0; mi];
    let mut obj_diag = vec![0.0; problem.num_vars];

    for _outer in 0..cfg.max_outer_iters {
        let rho = al.rho;
        let lambda_ineq_snapshot = al.lambda_ineq.clone();
        let result = inner.minimize(
            &mut |x: &[f64], grad: Option<&mut [f64]>| match grad {
                Some(g) => al.value_grad(x, g, &mut ws),
                None => al.value(x, &mut ws),
            },
            &mut |x: &[f64],
                  jeq: &mut [f64],
                  jineq: &mut [f64],
                  active: &mut [bool],
                  diag: &mut [f64]| {
                problem.equalities.jacobian_values(x, jeq);
                problem.inequalities.jacobian_values(x, jineq);
                problem.inequalities.eval(x, &mut jac_scratch);
                for r in 0..active.len() {
                    active[r] = lambda_ineq_snapshot[r] - rho * jac_scratch[r] > 0.0;
                }
                if !problem.objective.curvature_diag(x, diag) {
                    diag.fill(0.0);
                }
            },
            rho,
            &mut x,
            &problem.bounds,
            inner_tol,
            cfg.max_inner_iters,
            problem.equalities.sparsity(),
            problem.inequalities.sparsity(),
            &mut jeq_vals,
            &mut jineq_vals,
            &mut ineq_active,
            &mut obj_diag,
        );
        inner_total += result.iterations;
        if !result.finite {
            return NlpSolution {
                x,
                eq_multipliers: al.lambda_eq,
                ineq_multipliers: al.lambda_ineq.iter().map(|l| l.max(0.0)).collect(),
                status: SolveStatus::Diverged,
                kkt_residual: f64::INFINITY,
                iterations: inner_total,
            };
        }

        problem.equalities.eval(&x, &mut ws.ceq);
        problem.inequalities.eval(&x, &mut ws.cineq);
        if ws.ceq.iter().chain(ws.cineq.iter()).any(|v| !v.is_finite()) {
            return NlpSolution {
                x,
                eq_multipliers: al.lambda_eq,
                ineq_multipliers: al.lambda_ineq.iter().map(|l| l.max(0.0)).collect(),
                status: SolveStatus::Diverged,
                kkt_residual: f64::INFINITY,
                iterations: inner_total,
            };
        }

        // First-order multiplier estimates at the inner solution.
        let lambda_hat: Vec<f64> = ws
            .ceq
            .iter()
            .zip(&al.lambda_eq)
            .map(|(c, l)| l + al.rho * c)
            .collect();
        let mu_hat: Vec<f64> = ws
            .cineq
            .iter()
            .zip(&al.lambda_ineq)
            .map(|(g, l)| (l - al.rho * g).max(0.0))
            .collect();

        let kkt = kkt_residual(problem, &x, &lambda_hat, &mu_hat);
        // Feasibility-and-complementarity measure driving the penalty update.
        let mut feas: f64 = 0.0;
        for c in &ws.ceq {
            feas = feas.max(c.abs());
        }
        for (g, l) in ws.cineq.iter().zip(&al.lambda_ineq) {
            feas = feas.max(g.min(l / al.rho).abs());
        }
        log::debug!(
            "outer {_outer}: kkt {kkt:.3e} feas {feas:.3e} pg {:.2e} rho {:.1e} inner {}{}",
            result.pg_norm,
            al.rho,
            result.iterations,
            if result.stalled { " (stalled)" } else { "" },
        );

        if kkt <= cfg.kkt_tol {
            return NlpSolution {
                x,
                eq_multipliers: lambda_hat,
                ineq_multipliers: mu_hat,
                status: SolveStatus::Converged,
                kkt_residual: kkt,
                iterations: inner_total,
            };
        }

        // Inexact first-order multiplier method: adopt the estimates
        // whenever feasibility did not degrade; raise the penalty when it
        // stalled outright.
        if feas <= (0.9 * prev_feas).max(0.5 * cfg.kkt_tol) {
            al.lambda_eq = lambda_hat;
            al.lambda_ineq = mu_hat;
            for l in al.lambda_eq.iter_mut().chain(al.lambda_ineq.iter_mut()) {
                *l = l.clamp(-1e10, 1e10);
            }
            prev_feas = prev_feas.min(feas);
        } else {
            al.rho = (al.rho * cfg.penalty_growth).min(1e8);
        }
    }

    problem.equalities.eval(&x, &mut ws.ceq);
    problem.inequalities.eval(&x, &mut ws.cineq);
    let lambda_hat: Vec<f64> = ws
        .ceq
        .iter()
        .zip(&al.lambda_eq)
        .map(|(c, l)| l + al.rho * c)
        .collect();
    let mu_hat: Vec<f64> = ws
        .cineq
        .iter()
        .zip(&al.lambda_ineq)
        .map(|(g, l)| (l - al.rho * g).max(0.0))
        .collect();
    let kkt = kkt_residual(problem, &x, &lambda_hat, &mu_hat);
    NlpSolution {
        x,
        eq_multipliers: lambda_hat,
        ineq_multipliers: mu_hat,
        status: SolveStatus::MaxIters,
        kkt_residual: kkt,
        iterations: inner_total,
    }
}

#[cfg(test)]
pub(crate) mod test_util;

#[cfg(test)]
mod tests;
