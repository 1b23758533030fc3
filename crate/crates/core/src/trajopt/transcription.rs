//! Transcription of a kinematic sketch into the collocation NLP.
//!
//! Decision variables per knot (42): base position p (3), base velocity v
//! (3), body angular velocity w (3), rotation R (9, column-major), four
//! foot positions (12), four contact forces (12). The discrete dynamics
//! become equality constraints between consecutive knots; contact
//! complementarity is relaxed two-sided by `epsilon`; the friction pyramid
//! and leg-extension L1 ball are inequalities `g(x) >= 0`; normal-force and
//! foot-height nonnegativity live in the variable bounds.
//!
//! Constraint rows are scaled so that solver-level feasibility (1e-4)
//! implies much tighter physical residuals for the friction, kinematic and
//! complementarity families; scales are internal and are undone nowhere —
//! validation recomputes residuals in physical units from the trajectory.

use super::sketch::{KinematicSketch, TrajOptConfig};
use crate::nlp::{ConstraintSet, NlpProblem, Objective, Sparsity};
use crate::rot::{right_jacobian, rot_exp, rot_log, rot_log_jacobian, skew};
use crate::srb::SrbParams;
use nalgebra::{Matrix3, Vector3};
use std::sync::Arc;
use thiserror::Error;

pub const VARS_PER_KNOT: usize = 42;

// Row scales per constraint family, chosen to balance two needs: solver
// feasibility at 1e-4 in scaled units must imply the per-family physical
// tolerances (friction/kinematic 1e-6, complementarity 1e-4, dynamics
// 1e-4), while keeping Jacobian row norms within roughly one order of
// magnitude of each other so the penalty Hessian stays tractable.
const S_ROT: f64 = 30.0;
const S_W: f64 = 30.0;
const S_SHOULDER: f64 = 500.0;
const S_SYM_POS: f64 = 200.0;
const S_SYM_FORCE: f64 = 50.0;
const S_FRIC: f64 = 200.0;
const S_KIN: f64 = 200.0;
const S_COMP: f64 = 20.0;

#[derive(Debug, Error)]
pub enum TranscribeError {
    #[error("invalid sketch: {0}")]
    Sketch(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid params: {0}")]
    Params(String),
    #[error("knot {knot} foot {foot}: contact flagged but target foot height {z} is below ground")]
    ContactBelowGround { knot: usize, foot: usize, z: f64 },
}

/// Variable indexing for one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n_knots: usize,
}

impl Layout {
    pub fn num_vars(&self) -> usize {
        self.n_knots * VARS_PER_KNOT
    }
    pub fn p(&self, k: usize) -> usize {
        k * VARS_PER_KNOT
    }
    pub fn v(&self, k: usize) -> usize {
        k * VARS_PER_KNOT + 3
    }
    pub fn w(&self, k: usize) -> usize {
        k * VARS_PER_KNOT + 6
    }
    pub fn rot(&self, k: usize) -> usize {
        k * VARS_PER_KNOT + 9
    }
    pub fn foot(&self, k: usize, i: usize) -> usize {
        k * VARS_PER_KNOT + 18 + 3 * i
    }
    pub fn force(&self, k: usize, i: usize) -> usize {
        k * VARS_PER_KNOT + 30 + 3 * i
    }
}

/// Row counts per family, for tests and diagnostics.
#[derive(Debug, Clone)]
pub struct TranscriptionInfo {
    pub num_vars: usize,
    pub dynamics_rows: usize,
    pub shoulder_rows: usize,
    pub symmetry_rows: usize,
    pub friction_rows: usize,
    pub kinematic_rows: usize,
    pub complementarity_rows: usize,
    pub epsilon: f64,
}

struct Data {
    layout: Layout,
    params: SrbParams,
    epsilon: f64,
    symmetry: bool,
    w_pos: f64,
    w_rot: f64,
    w_foot: f64,
    smooth: Vector3<f64>,
    target_p: Vec<Vector3<f64>>,
    target_r: Vec<Matrix3<f64>>,
    target_feet: Vec<[Vector3<f64>; 4]>,
}

#[inline]
fn v3(x: &[f64], i: usize) -> Vector3<f64> {
    Vector3::new(x[i], x[i + 1], x[i + 2])
}

#[inline]
fn m3(x: &[f64], i: usize) -> Matrix3<f64> {
    Matrix3::from_column_slice(&x[i..i + 9])
}

/// Column-major flat index of matrix entry (row r, col c).
#[inline]
fn vecidx(r: usize, c: usize) -> usize {
    3 * c + r
}

trait Emit {
    fn emit(&mut self, row: usize, col: usize, val: f64);
}

struct PatternEmit<'a> {
    sparsity: &'a mut Sparsity,
}

impl Emit for PatternEmit<'_> {
    fn emit(&mut self, row: usize, col: usize, _val: f64) {
        self.sparsity.push(row, col);
    }
}

struct ValueEmit<'a> {
    vals: &'a mut [f64],
    k: usize,
}

impl Emit for ValueEmit<'_> {
    fn emit(&mut self, _row: usize, _col: usize, val: f64) {
        self.vals[self.k] = val;
        self.k += 1;
    }
}

// ---------------------------------------------------------------------------
// Equalities: dynamics (12 per interval), shoulder-plane (4 per knot),
// left/right symmetry ties (10 per knot, optional).
// ---------------------------------------------------------------------------

struct Equalities {
    data: Arc<Data>,
    sparsity: Sparsity,
}

impl Equalities {
    fn rows(data: &Data) -> (usize, usize, usize) {
        let n = data.layout.n_knots;
        let dynamics = 12 * (n - 1);
        let shoulder = 4 * n;
        let symmetry = if data.symmetry { 10 * n } else { 0 };
        (dynamics, shoulder, symmetry)
    }

    fn eval_into(data: &Data, x: &[f64], out: &mut [f64]) {
        let l = &data.layout;
        let n = l.n_knots;
        let params = &data.params;
        let dt = params.dt;
        let inertia = params.body_inertia;
        let (dyn_rows, shoulder_rows, _) = Self::rows(data);

        for k in 0..n - 1 {
            let base = 12 * k;
            let p = v3(x, l.p(k));
            let v = v3(x, l.v(k));
            let w = v3(x, l.w(k));
            let r = m3(x, l.rot(k));
            let p1 = v3(x, l.p(k + 1));
            let v1 = v3(x, l.v(k + 1));
            let w1 = v3(x, l.w(k + 1));
            let r1 = m3(x, l.rot(k + 1));

            // e1: ((p+ - p)/dt - v) in velocity units.
            let e1 = (p1 - p) / dt - v;
            // e2: m (v+ - v)/dt - sum f - m g, force units.
            let mut fsum = Vector3::zeros();
            let mut torque = Vector3::zeros();
            for i in 0..4 {
                let f = v3(x, l.force(k, i));
                fsum += f;
                torque += (v3(x, l.foot(k, i)) - p).cross(&f);
            }
            let e2 = (v1 - v) * (params.mass / dt) - fsum - params.mass * params.gravity;
            // e3: log(exp(-[w dt]) R^T R+), scaled.
            let e_exp = rot_exp(&w, -dt);
            let m = e_exp * r.transpose() * r1;
            let e3 = rot_log(&m) * S_ROT;
            // e4: (w+ - w - I^-1 (R^T tau - [w x] I w) dt), scaled.
            let iw = Vector3::new(inertia.x * w.x, inertia.y * w.y, inertia.z * w.z);
            let tb = r.transpose() * torque - w.cross(&iw);
            let acc = Vector3::new(tb.x / inertia.x, tb.y / inertia.y, tb.z / inertia.z);
            let e4 = (w1 - w - acc * dt) * S_W;

            for j in 0..3 {
                out[base + j] = e1[j];
                out[base + 3 + j] = e2[j];
                out[base + 6 + j] = e3[j];
                out[base + 9 + j] = e4[j];
            }
        }

        for k in 0..n {
            let p = v3(x, l.p(k));
            let r = m3(x, l.rot(k));
            for i in 0..4 {
                let d = v3(x, l.foot(k, i)) - p;
                let by = r.column(1).dot(&d) - params.shoulder_offsets[i].y;
                out[dyn_rows + 4 * k + i] = S_SHOULDER * by;
            }
        }

        if data.symmetry {
            let base = dyn_rows + shoulder_rows;
            for k in 0..n {
                let r = m3(x, l.rot(k));
                for (pair, (a, b)) in [(0usize, 1usize), (2, 3)].into_iter().enumerate() {
                    let row = base + 10 * k + 5 * pair;
                    let dp = v3(x, l.foot(k, a)) - v3(x, l.foot(k, b));
                    // Shoulder offsets of a pair share x and z, so the
                    // body-frame foot difference needs no offset term.
                    let bp = r.transpose() * dp;
                    let fa = v3(x, l.force(k, a));
                    let fb = v3(x, l.force(k, b));
                    let fd = r.transpose() * (fa - fb);
                    let fs = r.transpose() * (fa + fb);
                    out[row] = S_SYM_POS * bp.x;
                    out[row + 1] = S_SYM_POS * bp.z;
                    out[row + 2] = S_SYM_FORCE * fd.x;
                    out[row + 3] = S_SYM_FORCE * fs.y;
                    out[row + 4] = S_SYM_FORCE * fd.z;
                }
            }
        }
    }

    fn scan_jacobian<E: Emit>(data: &Data, x: &[f64], emit: &mut E) {
        let l = &data.layout;
        let n = l.n_knots;
        let params = &data.params;
        let dt = params.dt;
        let inertia = params.body_inertia;
        let (dyn_rows, shoulder_rows, _) = Self::rows(data);

        for k in 0..n - 1 {
            let base = 12 * k;
            let p = v3(x, l.p(k));
            let w = v3(x, l.w(k));
            let r = m3(x, l.rot(k));
            let r1 = m3(x, l.rot(k + 1));

            // e1 rows: (p+ - p)/dt - v.
            for j in 0..3 {
                let row = base + j;
                emit.emit(row, l.p(k + 1) + j, 1.0 / dt);
                emit.emit(row, l.p(k) + j, -1.0 / dt);
                emit.emit(row, l.v(k) + j, -1.0);
            }
            // e2 rows.
            let mvdt = params.mass / dt;
            for j in 0..3 {
                let row = base + 3 + j;
                emit.emit(row, l.v(k + 1) + j, mvdt);
                emit.emit(row, l.v(k) + j, -mvdt);
                for i in 0..4 {
                    emit.emit(row, l.force(k, i) + j, -1.0);
                }
            }
            // e3 rows: log(E R^T R1) with E = exp(-[w dt]).
            let e_exp = rot_exp(&w, -dt);
            let b = r.transpose() * r1;
            let m = e_exp * b;
            let lmat = rot_log_jacobian(&m);
            let a = e_exp * r.transpose();
            // d/dw columns.
            let jr = right_jacobian(&(-w * dt));
            let mut dw_cols = [[0.0f64; 3]; 3];
            for j in 0..3 {
                let u: Vector3<f64> = jr.column(j) * (-dt);
                let c = e_exp * skew(&u) * b;
                for e in 0..3 {
                    let mut acc = 0.0;
                    for rr in 0..3 {
                        for cc in 0..3 {
                            acc += lmat[e][vecidx(rr, cc)] * c[(rr, cc)];
                        }
                    }
                    dw_cols[e][j] = S_ROT * acc;
                }
            }
            for e in 0..3 {
                let row = base + 6 + e;
                for j in 0..3 {
                    emit.emit(row, l.w(k) + j, dw_cols[e][j]);
                }
                // d/dR entries: dM = E e_c e_r^T R1 -> (i,j) = E[i,c] R1[r,j].
                for c in 0..3 {
                    for rr in 0..3 {
                        let mut acc = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                acc += lmat[e][vecidx(i, j)] * e_exp[(i, c)] * r1[(rr, j)];
                            }
                        }
                        emit.emit(row, l.rot(k) + vecidx(rr, c), S_ROT * acc);
                    }
                }
                // d/dR1 entries: dM = A e_r e_c^T -> column c gets A[:, r].
                for c in 0..3 {
                    for rr in 0..3 {
                        let mut acc = 0.0;
                        for i in 0..3 {
                            acc += lmat[e][vecidx(i, c)] * a[(i, rr)];
                        }
                        emit.emit(row, l.rot(k + 1) + vecidx(rr, c), S_ROT * acc);
                    }
                }
            }
            // e4 rows.
            let mut fsum = Vector3::zeros();
            let mut torque = Vector3::zeros();
            for i in 0..4 {
                let f = v3(x, l.force(k, i));
                fsum += f;
                torque += (v3(x, l.foot(k, i)) - p).cross(&f);
            }
            let inv_i = Vector3::new(1.0 / inertia.x, 1.0 / inertia.y, 1.0 / inertia.z);
            // d/dw: -I + dt I^-1 ([w x] I_b - [(I_b w) x])
            let iw = Vector3::new(inertia.x * w.x, inertia.y * w.y, inertia.z * w.z);
            let gyro = skew(&w)
                * Matrix3::from_diagonal(&inertia)
                - skew(&iw);
            for e in 0..3 {
                let row = base + 9 + e;
                emit.emit(row, l.w(k + 1) + e, S_W);
                for j in 0..3 {
                    let mut val = if e == j { -1.0 } else { 0.0 };
                    val += dt * inv_i[e] * gyro[(e, j)];
                    emit.emit(row, l.w(k) + j, S_W * val);
                }
                // d/dR_{rc}: only row e == c: -dt/I_e * torque_r.
                for rr in 0..3 {
                    emit.emit(
                        row,
                        l.rot(k) + vecidx(rr, e),
                        -S_W * dt * inv_i[e] * torque[rr],
                    );
                }
                // d/dp, d/dfoot, d/dforce via world-torque chain.
                // dw+/d tau_world = -dt I^-1 R^T (as row e).
                for i in 0..4 {
                    let f = v3(x, l.force(k, i));
                    let sk_f = skew(&f);
                    let sk_d = skew(&(v3(x, l.foot(k, i)) - p));
                    for j in 0..3 {
                        // d tau/d foot = -[f x]; row e of -dt I^-1 R^T (-[f x])
                        let mut acc_foot = 0.0;
                        let mut acc_force = 0.0;
                        for t in 0..3 {
                            acc_foot += r[(t, e)] * sk_f[(t, j)];
                            acc_force += r[(t, e)] * sk_d[(t, j)];
                        }
                        emit.emit(row, l.foot(k, i) + j, S_W * dt * inv_i[e] * acc_foot);
                        emit.emit(row, l.force(k, i) + j, -S_W * dt * inv_i[e] * acc_force);
                    }
                }
                let sk_fsum = skew(&fsum);
                for j in 0..3 {
                    let mut acc = 0.0;
                    for t in 0..3 {
                        acc += r[(t, e)] * sk_fsum[(t, j)];
                    }
                    emit.emit(row, l.p(k) + j, -S_W * dt * inv_i[e] * acc);
                }
            }
        }

        // Shoulder-plane rows.
        for k in 0..n {
            let p = v3(x, l.p(k));
            let r = m3(x, l.rot(k));
            for i in 0..4 {
                let row = dyn_rows + 4 * k + i;
                let d = v3(x, l.foot(k, i)) - p;
                for j in 0..3 {
                    emit.emit(row, l.foot(k, i) + j, S_SHOULDER * r[(j, 1)]);
                    emit.emit(row, l.p(k) + j, -S_SHOULDER * r[(j, 1)]);
                }
                for rr in 0..3 {
                    emit.emit(row, l.rot(k) + vecidx(rr, 1), S_SHOULDER * d[rr]);
                }
            }
        }

        if data.symmetry {
            let base = dyn_rows + shoulder_rows;
            for k in 0..n {
                let r = m3(x, l.rot(k));
                for (pair, (fa_i, fb_i)) in [(0usize, 1usize), (2, 3)].into_iter().enumerate() {
                    let row = base + 10 * k + 5 * pair;
                    let dp = v3(x, l.foot(k, fa_i)) - v3(x, l.foot(k, fb_i));
                    let fa = v3(x, l.force(k, fa_i));
                    let fb = v3(x, l.force(k, fb_i));
                    // Rows 0,1: (R^T dp)_x, (R^T dp)_z.
                    for (rowoff, axis) in [(0usize, 0usize), (1, 2)] {
                        for j in 0..3 {
                            emit.emit(row + rowoff, l.foot(k, fa_i) + j, S_SYM_POS * r[(j, axis)]);
                            emit.emit(row + rowoff, l.foot(k, fb_i) + j, -S_SYM_POS * r[(j, axis)]);
                        }
                        for rr in 0..3 {
                            emit.emit(row + rowoff, l.rot(k) + vecidx(rr, axis), S_SYM_POS * dp[rr]);
                        }
                    }
                    // Rows 2..5: force rows (R^T (fa - fb))_x, (R^T (fa+fb))_y, (R^T (fa - fb))_z.
                    for (rowoff, axis, sign_b) in
                        [(2usize, 0usize, -1.0f64), (3, 1, 1.0), (4, 2, -1.0)]
                    {
                        let fcomb = fa + sign_b * fb;
                        for j in 0..3 {
                            emit.emit(row + rowoff, l.force(k, fa_i) + j, S_SYM_FORCE * r[(j, axis)]);
                            emit.emit(
                                row + rowoff,
                                l.force(k, fb_i) + j,
                                S_SYM_FORCE * sign_b * r[(j, axis)],
                            );
                        }
                        for rr in 0..3 {
                            emit.emit(row + rowoff, l.rot(k) + vecidx(rr, axis), S_SYM_FORCE * fcomb[rr]);
                        }
                    }
                }
            }
        }
    }
}

impl ConstraintSet for Equalities {
    fn dim(&self) -> usize {
        let (a, b, c) = Self::rows(&self.data);
        a + b + c
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        Self::eval_into(&self.data, x, out);
    }
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) {
        let mut emitter = ValueEmit { vals: out, k: 0 };
        Self::scan_jacobian(&self.data, x, &mut emitter);
        debug_assert_eq!(emitter.k, self.sparsity.len());
    }
    fn sparsity(&self) -> &Sparsity {
        &self.sparsity
    }
}

// ---------------------------------------------------------------------------
// Inequalities (g >= 0): friction pyramid, kinematic L1 ball, relaxed
// complementarity.
// ---------------------------------------------------------------------------

struct Inequalities {
    data: Arc<Data>,
    sparsity: Sparsity,
}

impl Inequalities {
    fn rows(data: &Data) -> (usize, usize, usize, usize) {
        let n = data.layout.n_knots;
        let friction = 16 * n;
        let kinematic = 16 * n;
        let comp_contact = 8 * n;
        let comp_slide = 16 * (n - 1);
        (friction, kinematic, comp_contact, comp_slide)
    }

    fn eval_into(data: &Data, x: &[f64], out: &mut [f64]) {
        let l = &data.layout;
        let n = l.n_knots;
        let mu = data.params.friction_coeff;
        let l_leg = data.params.leg_length;
        let eps = data.epsilon;
        let (fric, kin, ccont, _) = Self::rows(data);

        for k in 0..n {
            for i in 0..4 {
                let f = v3(x, l.force(k, i));
                let row = 16 * k + 4 * i;
                out[row] = S_FRIC * (mu * f.z - f.x);
                out[row + 1] = S_FRIC * (mu * f.z + f.x);
                out[row + 2] = S_FRIC * (mu * f.z - f.y);
                out[row + 3] = S_FRIC * (mu * f.z + f.y);
            }
        }

        for k in 0..n {
            let p = v3(x, l.p(k));
            let r = m3(x, l.rot(k));
            for i in 0..4 {
                let d = v3(x, l.foot(k, i)) - p;
                let bx = r.column(0).dot(&d) - data.params.shoulder_offsets[i].x;
                let bz = r.column(2).dot(&d) - data.params.shoulder_offsets[i].z;
                let row = fric + 16 * k + 4 * i;
                let mut q = 0;
                for sx in [-1.0f64, 1.0] {
                    for sz in [-1.0f64, 1.0] {
                        out[row + q] = S_KIN * (l_leg - sx * bx - sz * bz);
                        q += 1;
                    }
                }
            }
        }

        for k in 0..n {
            for i in 0..4 {
                let fz = x[l.force(k, i) + 2];
                let pz = x[l.foot(k, i) + 2];
                let prod = fz * pz;
                let row = fric + kin + 8 * k + 2 * i;
                out[row] = S_COMP * (eps - prod);
                out[row + 1] = S_COMP * (prod + eps);
            }
        }

        for k in 0..n - 1 {
            for i in 0..4 {
                let fz = x[l.force(k, i) + 2];
                let dx = x[l.foot(k + 1, i)] - x[l.foot(k, i)];
                let dy = x[l.foot(k + 1, i) + 1] - x[l.foot(k, i) + 1];
                let row = fric + kin + ccont + 16 * k + 4 * i;
                out[row] = S_COMP * (eps - fz * dx);
                out[row + 1] = S_COMP * (fz * dx + eps);
                out[row + 2] = S_COMP * (eps - fz * dy);
                out[row + 3] = S_COMP * (fz * dy + eps);
            }
        }
    }

    fn scan_jacobian<E: Emit>(data: &Data, x: &[f64], emit: &mut E) {
        let l = &data.layout;
        let n = l.n_knots;
        let mu = data.params.friction_coeff;
        let (fric, kin, ccont, _) = Self::rows(data);

        for k in 0..n {
            for i in 0..4 {
                let row = 16 * k + 4 * i;
                let fx = l.force(k, i);
                emit.emit(row, fx + 2, S_FRIC * mu);
                emit.emit(row, fx, -S_FRIC);
                emit.emit(row + 1, fx + 2, S_FRIC * mu);
                emit.emit(row + 1, fx, S_FRIC);
                emit.emit(row + 2, fx + 2, S_FRIC * mu);
                emit.emit(row + 2, fx + 1, -S_FRIC);
                emit.emit(row + 3, fx + 2, S_FRIC * mu);
                emit.emit(row + 3, fx + 1, S_FRIC);
            }
        }

        for k in 0..n {
            let p = v3(x, l.p(k));
            let r = m3(x, l.rot(k));
            for i in 0..4 {
                let d = v3(x, l.foot(k, i)) - p;
                let row = fric + 16 * k + 4 * i;
                let mut q = 0;
                for sx in [-1.0f64, 1.0] {
                    for sz in [-1.0f64, 1.0] {
                        for j in 0..3 {
                            let coef = sx * r[(j, 0)] + sz * r[(j, 2)];
                            emit.emit(row + q, l.foot(k, i) + j, -S_KIN * coef);
                            emit.emit(row + q, l.p(k) + j, S_KIN * coef);
                        }
                        for rr in 0..3 {
                            emit.emit(row + q, l.rot(k) + vecidx(rr, 0), -S_KIN * sx * d[rr]);
                            emit.emit(row + q, l.rot(k) + vecidx(rr, 2), -S_KIN * sz * d[rr]);
                        }
                        q += 1;
                    }
                }
            }
        }

        for k in 0..n {
            for i in 0..4 {
                let fz_idx = l.force(k, i) + 2;
                let pz_idx = l.foot(k, i) + 2;
                let fz = x[fz_idx];
                let pz = x[pz_idx];
                let row = fric + kin + 8 * k + 2 * i;
                emit.emit(row, fz_idx, -S_COMP * pz);
                emit.emit(row, pz_idx, -S_COMP * fz);
                emit.emit(row + 1, fz_idx, S_COMP * pz);
                emit.emit(row + 1, pz_idx, S_COMP * fz);
            }
        }

        for k in 0..n - 1 {
            for i in 0..4 {
                let fz_idx = l.force(k, i) + 2;
                let fz = x[fz_idx];
                let row = fric + kin + ccont + 16 * k + 4 * i;
                for (axis, roff) in [(0usize, 0usize), (1, 2)] {
                    let a_idx = l.foot(k, i) + axis;
                    let b_idx = l.foot(k + 1, i) + axis;
                    let delta = x[b_idx] - x[a_idx];
                    emit.emit(row + roff, fz_idx, -S_COMP * delta);
                    emit.emit(row + roff, b_idx, -S_COMP * fz);
                    emit.emit(row + roff, a_idx, S_COMP * fz);
                    emit.emit(row + roff + 1, fz_idx, S_COMP * delta);
                    emit.emit(row + roff + 1, b_idx, S_COMP * fz);
                    emit.emit(row + roff + 1, a_idx, -S_COMP * fz);
                }
            }
        }
    }
}

impl ConstraintSet for Inequalities {
    fn dim(&self) -> usize {
        let (a, b, c, d) = Self::rows(&self.data);
        a + b + c + d
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        Self::eval_into(&self.data, x, out);
    }
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) {
        let mut emitter = ValueEmit { vals: out, k: 0 };
        Self::scan_jacobian(&self.data, x, &mut emitter);
        debug_assert_eq!(emitter.k, self.sparsity.len());
    }
    fn sparsity(&self) -> &Sparsity {
        &self.sparsity
    }
}

// ---------------------------------------------------------------------------
// Objective: knotwise quadratic tracking plus foot smoothing.
// ---------------------------------------------------------------------------

struct Tracking {
    data: Arc<Data>,
}

impl Objective for Tracking {
    fn value(&self, x: &[f64]) -> f64 {
        let d = &self.data;
        let l = &d.layout;
        let n = l.n_knots;
        let mut total = 0.0;
        for k in 0..n {
            let p = v3(x, l.p(k));
            total += d.w_pos * (p - d.target_p[k]).norm_squared();
            let r = m3(x, l.rot(k));
            // Chordal rotation metric: ||R - Rbar||_F^2 / 2 equals the
            // squared geodesic angle to second order, and is exactly
            // quadratic in the decision variables.
            total += 0.5 * d.w_rot * (r - d.target_r[k]).norm_squared();
            for i in 0..4 {
                let fp = v3(x, l.foot(k, i));
                total += d.w_foot * (fp - d.target_feet[k][i]).norm_squared();
            }
        }
        let inv_dt2 = 1.0 / (d.params.dt * d.params.dt);
        for k in 0..n - 1 {
            for i in 0..4 {
                let a = v3(x, l.foot(k, i));
                let b = v3(x, l.foot(k + 1, i));
                let delta = b - a;
                total += inv_dt2
                    * (d.smooth.x * delta.x * delta.x
                        + d.smooth.y * delta.y * delta.y
                        + d.smooth.z * delta.z * delta.z);
            }
        }
        total
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = &self.data;
        let l = &d.layout;
        let n = l.n_knots;
        grad.fill(0.0);
        let mut total = 0.0;
        for k in 0..n {
            let p = v3(x, l.p(k));
            let dp = p - d.target_p[k];
            total += d.w_pos * dp.norm_squared();
            for j in 0..3 {
                grad[l.p(k) + j] += 2.0 * d.w_pos * dp[j];
            }
            let r = m3(x, l.rot(k));
            let dr = r - d.target_r[k];
            total += 0.5 * d.w_rot * dr.norm_squared();
            for c in 0..3 {
                for rr in 0..3 {
                    grad[l.rot(k) + vecidx(rr, c)] += d.w_rot * dr[(rr, c)];
                }
            }
            for i in 0..4 {
                let fp = v3(x, l.foot(k, i));
                let df = fp - d.target_feet[k][i];
                total += d.w_foot * df.norm_squared();
                for j in 0..3 {
                    grad[l.foot(k, i) + j] += 2.0 * d.w_foot * df[j];
                }
            }
        }
        let inv_dt2 = 1.0 / (d.params.dt * d.params.dt);
        for k in 0..n - 1 {
            for i in 0..4 {
                let a = v3(x, l.foot(k, i));
                let b = v3(x, l.foot(k + 1, i));
                let delta = b - a;
                let wv = Vector3::new(
                    d.smooth.x * delta.x,
                    d.smooth.y * delta.y,
                    d.smooth.z * delta.z,
                );
                total += inv_dt2 * delta.dot(&wv);
                for j in 0..3 {
                    grad[l.foot(k + 1, i) + j] += 2.0 * inv_dt2 * wv[j];
                    grad[l.foot(k, i) + j] -= 2.0 * inv_dt2 * wv[j];
                }
            }
        }
        total
    }

    fn curvature_diag(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = &self.data;
        let l = &d.layout;
        let n = l.n_knots;
        out.fill(0.0);
        let inv_dt2 = 1.0 / (d.params.dt * d.params.dt);
        for k in 0..n {
            for j in 0..3 {
                out[l.p(k) + j] = 2.0 * d.w_pos;
            }
            for c in 0..9 {
                out[l.rot(k) + c] = d.w_rot;
            }
            for i in 0..4 {
                for j in 0..3 {
                    let mut v = 2.0 * d.w_foot;
                    let smooth_j = 2.0 * inv_dt2 * d.smooth[j];
                    if k > 0 {
                        v += smooth_j;
                    }
                    if k + 1 < n {
                        v += smooth_j;
                    }
                    out[l.foot(k, i) + j] = v;
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Assembly.
// ---------------------------------------------------------------------------

/// Builds the sketch-consistent initial guess: targets for p/R/feet, the
/// authored forces, and finite-differenced base velocities.
pub fn initial_guess(sketch: &KinematicSketch, params: &SrbParams) -> Vec<f64> {
    let n = sketch.knots.len();
    let layout = Layout { n_knots: n };
    let mut x = vec![0.0; layout.num_vars()];
    let dt = params.dt;
    let mu = params.friction_coeff;
    for (k, knot) in sketch.knots.iter().enumerate() {
        for j in 0..3 {
            x[layout.p(k) + j] = knot.target_position[j];
        }
        for c in 0..9 {
            x[layout.rot(k) + c] = knot.target_rotation[(c % 3, c / 3)];
        }
        for i in 0..4 {
            for j in 0..3 {
                x[layout.foot(k, i) + j] = knot.target_foot_positions[i][j];
            }
            x[layout.foot(k, i) + 2] = x[layout.foot(k, i) + 2].max(0.0);
            let f = knot.guess_forces[i];
            let fz = f.z.clamp(0.0, params.max_normal_force);
            x[layout.force(k, i)] = f.x.clamp(-mu * fz, mu * fz);
            x[layout.force(k, i) + 1] = f.y.clamp(-mu * fz, mu * fz);
            x[layout.force(k, i) + 2] = fz;
        }
    }
    // Velocities by finite differences of targets, angular velocities from
    // consecutive target rotations.
    for k in 0..n {
        let (ka, kb, denom) = if k == 0 {
            (0, 1, dt)
        } else if k == n - 1 {
            (n - 2, n - 1, dt)
        } else {
            (k - 1, k + 1, 2.0 * dt)
        };
        let va = (sketch.knots[kb].target_position - sketch.knots[ka].target_position) / denom;
        for j in 0..3 {
            x[layout.v(k) + j] = va[j];
        }
        let kb2 = (k + 1).min(n - 1);
        let ka2 = kb2 - 1;
        let wrel = rot_log(
            &(sketch.knots[ka2].target_rotation.transpose() * sketch.knots[kb2].target_rotation),
        ) / dt;
        for j in 0..3 {
            x[layout.w(k) + j] = wrel[j];
        }
    }
    x
}

/// Transcribes the sketch into an NLP at the given complementarity
/// relaxation. Returns the problem and per-family row counts.
pub fn transcribe(
    sketch: &KinematicSketch,
    params: &SrbParams,
    cfg: &TrajOptConfig,
    epsilon: f64,
) -> Result<(NlpProblem, TranscriptionInfo), TranscribeError> {
    params.validate().map_err(TranscribeError::Params)?;
    cfg.validate().map_err(TranscribeError::Config)?;
    sketch.validate(params).map_err(TranscribeError::Sketch)?;
    for (k, knot) in sketch.knots.iter().enumerate() {
        for i in 0..4 {
            if knot.contact_flags[i] && knot.target_foot_positions[i].z < -1e-9 {
                return Err(TranscribeError::ContactBelowGround {
                    knot: k,
                    foot: i,
                    z: knot.target_foot_positions[i].z,
                });
            }
        }
    }

    let n = sketch.knots.len();
    let layout = Layout { n_knots: n };
    let data = Arc::new(Data {
        layout,
        params: params.clone(),
        epsilon,
        symmetry: cfg.symmetry,
        w_pos: cfg.position_weight,
        w_rot: cfg.rotation_weight,
        w_foot: cfg.foot_weight,
        smooth: cfg.foot_smooth_weight,
        target_p: sketch.knots.iter().map(|k| k.target_position).collect(),
        target_r: sketch
            .knots
            .iter()
            .map(|k| crate::rot::orthonormalize(&k.target_rotation))
            .collect(),
        target_feet: sketch
            .knots
            .iter()
            .map(|k| k.target_foot_positions)
            .collect(),
    });

    // Bounds.
    let mut bounds = vec![(0.0f64, 0.0f64); layout.num_vars()];
    let mu = params.friction_coeff;
    let fmax = params.max_normal_force;
    for k in 0..n {
        for j in 0..3 {
            bounds[layout.p(k) + j] = if j == 2 { (-2.0, 5.0) } else { (-10.0, 10.0) };
            bounds[layout.v(k) + j] = (-30.0, 30.0);
            bounds[layout.w(k) + j] = (-60.0, 60.0);
        }
        for c in 0..9 {
            bounds[layout.rot(k) + c] = (-1.5, 1.5);
        }
        for i in 0..4 {
            bounds[layout.foot(k, i)] = (-10.0, 10.0);
            bounds[layout.foot(k, i) + 1] = (-10.0, 10.0);
            bounds[layout.foot(k, i) + 2] = (0.0, 2.0); // ground non-penetration
            bounds[layout.force(k, i)] = (-mu * fmax, mu * fmax);
            bounds[layout.force(k, i) + 1] = (-mu * fmax, mu * fmax);
            bounds[layout.force(k, i) + 2] = (0.0, fmax);
        }
    }
    // Pin the initial rotation to the sketch.
    let r0 = crate::rot::orthonormalize(&sketch.knots[0].target_rotation);
    for c in 0..3 {
        for rr in 0..3 {
            let val = r0[(rr, c)];
            bounds[layout.rot(0) + vecidx(rr, c)] = (val, val);
        }
    }
    // Sagittal restriction as variable pins.
    if cfg.sagittal_only {
        for k in 0..n {
            bounds[layout.p(k) + 1] = (0.0, 0.0);
            bounds[layout.v(k) + 1] = (0.0, 0.0);
            bounds[layout.w(k)] = (0.0, 0.0);
            bounds[layout.w(k) + 2] = (0.0, 0.0);
            for i in 0..4 {
                let y = params.shoulder_offsets[i].y;
                bounds[layout.foot(k, i) + 1] = (y, y);
                bounds[layout.force(k, i) + 1] = (0.0, 0.0);
            }
        }
    }

    let equalities = Equalities {
        sparsity: {
            let mut sp = Sparsity::default();
            let x0 = initial_guess(sketch, params);
            Equalities::scan_jacobian(&data, &x0, &mut PatternEmit { sparsity: &mut sp });
            sp
        },
        data: data.clone(),
    };
    let inequalities = Inequalities {
        sparsity: {
            let mut sp = Sparsity::default();
            let x0 = initial_guess(sketch, params);
            Inequalities::scan_jacobian(&data, &x0, &mut PatternEmit { sparsity: &mut sp });
            sp
        },
        data: data.clone(),
    };

    let (dyn_rows, shoulder_rows, sym_rows) = Equalities::rows(&data);
    let (fric, kin, ccont, cslide) = Inequalities::rows(&data);
    let info = TranscriptionInfo {
        num_vars: layout.num_vars(),
        dynamics_rows: dyn_rows,
        shoulder_rows,
        symmetry_rows: sym_rows,
        friction_rows: fric,
        kinematic_rows: kin,
        complementarity_rows: ccont + cslide,
        epsilon,
    };

    let problem = NlpProblem {
        num_vars: layout.num_vars(),
        bounds,
        objective: Box::new(Tracking { data: data.clone() }),
        equalities: Box::new(equalities),
        inequalities: Box::new(inequalities),
    };
    Ok((problem, info))
}
