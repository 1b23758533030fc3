//! Bound-projected damped Gauss-Newton inner solver for the augmented
//! Lagrangian subproblems.
//!
//! The AL Hessian is modeled as `sigma I + rho J^T J` over the equality
//! rows and the active inequality rows; the collocation problems this crate
//! builds have a small fixed band (variables couple only within a knot and
//! to its neighbor), so the model factors with a banded Cholesky in O(n b^2).
//! Variables pinned at active bounds are fixed by zeroing their row/column;
//! steps go through a projected Armijo line search with Levenberg-style
//! damping adaptation.

use super::{ConstraintSet, Sparsity};

/// Symmetric banded matrix in lower storage: `data[d][i] = A[i + d, i]`
/// for diagonals d = 0..=bandwidth.
pub struct BandMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<Vec<f64>>,
}

impl BandMatrix {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: (0..=bandwidth).map(|_| vec![0.0; n]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for diag in self.data.iter_mut() {
            diag.fill(0.0);
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.bandwidth, "entry ({i},{j}) outside bandwidth");
        self.data[d][lo] += v;
    }

    /// In-place Cholesky `A = L L^T`; returns false when a pivot fails.
    pub fn cholesky(&mut self) -> bool {
        let n = self.n;
        let b = self.bandwidth;
        for j in 0..n {
            let mut diag = self.data[0][j];
            if !(diag.is_finite()) {
                return false;
            }
            // Subtract contributions of earlier columns within the band.
            let k0 = j.saturating_sub(b);
            for k in k0..j {
                let l_jk = self.data[j - k][k];
                diag -= l_jk * l_jk;
            }
            if diag <= 0.0 {
                return false;
            }
            let l_jj = diag.sqrt();
            self.data[0][j] = l_jj;
            let imax = (j + b).min(n - 1);
            for i in j + 1..=imax {
                let mut v = self.data[i - j][j];
                let k0 = i.saturating_sub(b).max(0);
                for k in k0..j {
                    // Both L[i,k] and L[j,k] must be inside the band.
                    if i - k <= b {
                        v -= self.data[i - k][k] * self.data[j - k][k];
                    }
                }
                self.data[i - j][j] = v / l_jj;
            }
        }
        true
    }

    /// Solves `L L^T x = rhs` in place after `cholesky`.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        let b = self.bandwidth;
        // Forward: L y = rhs.
        for i in 0..n {
            let k0 = i.saturating_sub(b);
            let mut v = rhs[i];
            for k in k0..i {
                v -= self.data[i - k][k] * rhs[k];
            }
            rhs[i] = v / self.data[0][i];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let imax = (i + b).min(n - 1);
            let mut v = rhs[i];
            for k in i + 1..=imax {
                v -= self.data[k - i][i] * rhs[k];
            }
            rhs[i] = v / self.data[0][i];
        }
    }
}

pub struct InnerResult {
    pub iterations: usize,
    pub finite: bool,
    pub pg_norm: f64,
    pub stalled: bool,
}

/// Per-row entry index lists of a sparsity pattern.
fn rows_of(sp: &Sparsity, dim: usize) -> Vec<Vec<u32>> {
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); dim];
    for (k, &r) in sp.rows.iter().enumerate() {
        rows[r].push(k as u32);
    }
    rows
}

fn bandwidth_of(sp: &Sparsity, rows: &[Vec<u32>]) -> usize {
    let mut b = 0usize;
    for entries in rows {
        if entries.is_empty() {
            continue;
        }
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for &k in entries {
            let c = sp.cols[k as usize];
            lo = lo.min(c);
            hi = hi.max(c);
        }
        b = b.max(hi - lo);
    }
    b
}

pub struct ProjectedNewton {
    n: usize,
    band: BandMatrix,
    eq_rows: Vec<Vec<u32>>,
    ineq_rows: Vec<Vec<u32>>,
    sigma: f64,
    /// Accepted steps since the last (re)factorization.
    steps_since_factor: usize,
    alpha_start: f64,
    // scratch
    grad: Vec<f64>,
    step: Vec<f64>,
    x_trial: Vec<f64>,
    free: Vec<bool>,
    free_at_factor: Vec<bool>,
}

impl ProjectedNewton {
    pub fn new(n: usize, eq_sparsity: &Sparsity, ineq_sparsity: &Sparsity, eq_dim: usize, ineq_dim: usize) -> Self {
        let eq_rows = rows_of(eq_sparsity, eq_dim);
        let ineq_rows = rows_of(ineq_sparsity, ineq_dim);
        let bandwidth = bandwidth_of(eq_sparsity, &eq_rows)
            .max(bandwidth_of(ineq_sparsity, &ineq_rows))
            .min(n.saturating_sub(1));
        Self {
            n,
            band: BandMatrix::new(n, bandwidth),
            eq_rows,
            ineq_rows,
            sigma: 1.0,
            steps_since_factor: usize::MAX,
            alpha_start: 1.0,
            grad: vec![0.0; n],
            step: vec![0.0; n],
            x_trial: vec![0.0; n],
            free: vec![true; n],
            free_at_factor: vec![true; n],
        }
    }

    /// Assembles `sigma I + diag(curvature) + rho J^T J` (equalities plus
    /// active inequality rows), fixing non-free variables.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &mut self,
        rho: f64,
        eq_sp: &Sparsity,
        eq_vals: &[f64],
        ineq_sp: &Sparsity,
        ineq_vals: &[f64],
        ineq_active: &[bool],
        obj_diag: &[f64],
    ) {
        self.band.clear();
        for i in 0..self.n {
            self.band.data[0][i] = self.sigma + obj_diag[i].max(0.0);
        }
        let mut add_rows = |sp: &Sparsity, vals: &[f64], rows: &Vec<Vec<u32>>, active: Option<&[bool]>| {
            for (r, entries) in rows.iter().enumerate() {
                if let Some(a) = active {
                    if !a[r] {
                        continue;
                    }
                }
                for (ii, &ka) in entries.iter().enumerate() {
                    let ca = sp.cols[ka as usize];
                    if !self.free[ca] {
                        continue;
                    }
                    let va = vals[ka as usize];
                    for &kb in &entries[ii..] {
                        let cb = sp.cols[kb as usize];
                        if !self.free[cb] {
                            continue;
                        }
                        let vb = vals[kb as usize];
                        self.band.add(ca, cb, rho * va * vb);
                    }
                }
            }
        };
        add_rows(eq_sp, eq_vals, &self.eq_rows, None);
        add_rows(ineq_sp, ineq_vals, &self.ineq_rows, Some(ineq_active));
        // Fixed variables keep a unit diagonal.
        for i in 0..self.n {
            if !self.free[i] {
                self.band.data[0][i] = 1.0;
                for d in 1..=self.band.bandwidth {
                    self.band.data[d][i] = 0.0;
                    if i >= d {
                        self.band.data[d][i - d] = 0.0;
                    }
                }
            }
        }
    }

    /// Minimizes the augmented Lagrangian over the box. `f` evaluates value
    /// (+ gradient), `jac` fills the two Jacobians and the active mask at
    /// the current point.
    #[allow(clippy::too_many_arguments)]
    pub fn minimize<F, J>(
        &mut self,
        f: &mut F,
        jac: &mut J,
        rho: f64,
        x: &mut [f64],
        bounds: &[(f64, f64)],
        tol: f64,
        max_iters: usize,
        eq_sp: &Sparsity,
        ineq_sp: &Sparsity,
        eq_vals: &mut Vec<f64>,
        ineq_vals: &mut Vec<f64>,
        ineq_active: &mut Vec<bool>,
        obj_diag: &mut Vec<f64>,
    ) -> InnerResult
    where
        F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
        J: FnMut(&[f64], &mut [f64], &mut [f64], &mut [bool], &mut [f64]),
    {
        let n = self.n;
        let mut fx = f(x, Some(&mut self.grad));
        if !fx.is_finite() {
            return InnerResult {
                iterations: 0,
                finite: false,
                pg_norm: f64::INFINITY,
                stalled: false,
            };
        }
        let mut pg = projected_gradient_norm(x, &self.grad, bounds);
        let mut iterations = 0;
        let mut stalled = false;
        let mut alpha_sum = 0.0;
        let mut full_steps = 0usize;
        let mut chol_fails = 0usize;
        let mut full_streak = 0usize;

        self.steps_since_factor = usize::MAX;
        while pg > tol && iterations < max_iters {
            iterations += 1;
            if iterations % 100 == 0 {
                log::trace!(
                    "  newton iter {iterations}: pg {pg:.3e} sigma {:.1e} f {fx:.6e} mean_alpha {:.2} full {} cholfail {}",
                    self.sigma,
                    alpha_sum / 100.0,
                    full_steps,
                    chol_fails,
                );
                alpha_sum = 0.0;
                full_steps = 0;
                chol_fails = 0;
            }
            // Active bounds: pinned when at the bound with inward-pointing
            // model gradient.
            for i in 0..n {
                let (lo, hi) = bounds[i];
                let at_lo = x[i] - lo <= 1e-10 * (1.0 + lo.abs()) && self.grad[i] > 0.0;
                let at_hi = hi - x[i] <= 1e-10 * (1.0 + hi.abs()) && self.grad[i] < 0.0;
                self.free[i] = !(at_lo || at_hi) && lo < hi;
            }

            // The factorization is reused across steps; the gradient is
            // always fresh, so stale curvature only costs step quality.
            let active_set_changed = self.free != self.free_at_factor;
            if self.steps_since_factor > 25 || active_set_changed {
                jac(x, eq_vals, ineq_vals, ineq_active, obj_diag);
                self.assemble(rho, eq_sp, eq_vals, ineq_sp, ineq_vals, ineq_active, obj_diag);
                if !self.band.cholesky() {
                    self.sigma = (self.sigma * 10.0).min(1e12);
                    chol_fails += 1;
                    if self.sigma >= 1e12 {
                        stalled = true;
                        break;
                    }
                    continue;
                }
                self.steps_since_factor = 0;
                self.free_at_factor.copy_from_slice(&self.free);
            }
            for i in 0..n {
                self.step[i] = if self.free[i] { -self.grad[i] } else { 0.0 };
            }
            self.band.solve(&mut self.step);
            for i in 0..n {
                if !self.free[i] {
                    self.step[i] = 0.0;
                }
            }

            // Projected Armijo line search starting from the previous
            // accepted step length.
            let mut alpha = (4.0 * self.alpha_start).min(1.0);
            let mut accepted = false;
            let mut fx_new = fx;
            for _bt in 0..40 {
                for i in 0..n {
                    let (lo, hi) = bounds[i];
                    self.x_trial[i] = (x[i] + alpha * self.step[i]).clamp(lo, hi);
                }
                let ftrial = f(&self.x_trial, None);
                if ftrial.is_finite() {
                    let mut gstep = 0.0;
                    for i in 0..n {
                        gstep += self.grad[i] * (self.x_trial[i] - x[i]);
                    }
                    if ftrial <= fx + 1e-4 * gstep.min(0.0) {
                        fx_new = ftrial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }

            if !accepted {
                if self.steps_since_factor > 0 {
                    // Stale factorization: force a rebuild before raising
                    // the damping.
                    self.steps_since_factor = usize::MAX;
                    continue;
                }
                self.sigma = (self.sigma * 10.0).min(1e12);
                self.steps_since_factor = usize::MAX;
                if self.sigma >= 1e12 {
                    stalled = true;
                    break;
                }
                continue;
            }
            alpha_sum += alpha;
            self.alpha_start = alpha;
            self.steps_since_factor = self.steps_since_factor.saturating_add(1);
            if alpha >= 0.99 {
                full_steps += 1;
                full_streak += 1;
            } else {
                full_streak = 0;
                if alpha < 0.05 {
                    self.sigma = (self.sigma * 2.5).min(1e12);
                    self.steps_since_factor = usize::MAX;
                }
            }
            // Relax damping only at natural refactor points.
            if full_streak >= 20 {
                self.sigma = (self.sigma * 0.3).max(1e-8);
                self.steps_since_factor = usize::MAX;
                full_streak = 0;
            }
            x.copy_from_slice(&self.x_trial);
            fx = f(x, Some(&mut self.grad));
            debug_assert!((fx - fx_new).abs() <= 1e-9 * (1.0 + fx_new.abs()));
            pg = projected_gradient_norm(x, &self.grad, bounds);
        }

        InnerResult {
            iterations,
            finite: true,
            pg_norm: pg,
            stalled,
        }
    }
}

pub fn projected_gradient_norm(x: &[f64], grad: &[f64], bounds: &[(f64, f64)]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..x.len() {
        let (lo, hi) = bounds[i];
        let step = (x[i] - grad[i]).clamp(lo, hi) - x[i];
        norm = norm.max(step.abs());
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_cholesky_matches_dense() {
        use nalgebra::DMatrix;
        let n = 12;
        let b = 3;
        // SPD banded matrix.
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 4.0 + i as f64 * 0.1;
            for d in 1..=b {
                if i + d < n {
                    let v = 0.3 / d as f64 * ((i * d) as f64 * 0.7).sin();
                    a[(i + d, i)] = v;
                    a[(i, i + d)] = v;
                }
            }
        }
        let mut band = BandMatrix::new(n, b);
        for i in 0..n {
            band.add(i, i, a[(i, i)]);
            for d in 1..=b {
                if i + d < n {
                    band.add(i + d, i, a[(i + d, i)]);
                }
            }
        }
        assert!(band.cholesky());
        let rhs_v: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut x = rhs_v.clone();
        band.solve(&mut x);
        let expected = a
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&rhs_v))
            .unwrap();
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-10, "{} vs {}", x[i], expected[i]);
        }
    }
}
