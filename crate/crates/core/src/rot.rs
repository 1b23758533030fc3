//! SO(3) primitives shared by the dynamics model, the trajectory optimizer
//! and the simulator: exponential/log maps, their analytic derivatives, and
//! quaternion helpers.
//!
//! Matrix entries are ordered column-major wherever a rotation is flattened
//! to 9 values (matches `nalgebra` storage).

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Skew-symmetric cross-product matrix: `skew(w) * v == w.cross(&v)`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// `sin(theta)/theta` with series fallback near zero.
fn sinc(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

/// `(1 - cos(theta))/theta^2` with series fallback near zero.
fn cosc(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        (1.0 - theta.cos()) / (theta * theta)
    }
}

/// Rotation matrix `exp([w x] dt)` via Rodrigues' formula.
pub fn rot_exp(omega: &Vector3<f64>, dt: f64) -> Matrix3<f64> {
    let w = omega * dt;
    let theta = w.norm();
    let k = skew(&w);
    Matrix3::identity() + sinc(theta) * k + cosc(theta) * (k * k)
}

/// 3-vector log map of a rotation matrix (inverse of `rot_exp` with dt = 1).
///
/// Accepts slightly non-orthogonal input (as produced mid-optimization); the
/// formula degrades gracefully as long as the matrix is within ~1e-3 of a
/// rotation. Angles up to pi are handled; at theta near pi the axis is
/// recovered from the symmetric part.
pub fn rot_log(m: &Matrix3<f64>) -> Vector3<f64> {
    let s = Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    let c = 0.5 * (m.trace() - 1.0);
    let n = s.norm();
    let theta = n.atan2(c);
    if theta > 3.0 {
        // Near pi the antisymmetric part vanishes; use R + R^T.
        let b = 0.5 * (m + m.transpose()) - (c * Matrix3::identity());
        // b = (1 - cos) a a^T scaled; pick the largest diagonal for stability.
        let one_minus_c = (1.0 - c).max(1e-12);
        let mut axis = Vector3::new(
            (b[(0, 0)] / one_minus_c).max(0.0).sqrt(),
            (b[(1, 1)] / one_minus_c).max(0.0).sqrt(),
            (b[(2, 2)] / one_minus_c).max(0.0).sqrt(),
        );
        // Fix signs from the antisymmetric part (or off-diagonals when s ~ 0).
        if n > 1e-8 {
            if s.x < 0.0 {
                axis.x = -axis.x;
            }
            if s.y < 0.0 {
                axis.y = -axis.y;
            }
            if s.z < 0.0 {
                axis.z = -axis.z;
            }
        } else {
            // theta == pi: signs of off-diagonal products determine relative signs.
            let i = axis.imax();
            if axis[i] > 0.0 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                if b[(i, j)] / one_minus_c < 0.0 {
                    axis[j] = -axis[j];
                }
                if b[(i, k)] / one_minus_c < 0.0 {
                    axis[k] = -axis[k];
                }
            }
        }
        let norm = axis.norm();
        if norm > 1e-12 {
            return axis * (theta / norm);
        }
        return Vector3::zeros();
    }
    // gamma = theta / sin(theta)
    let gamma = if theta < 1e-4 {
        let t2 = theta * theta;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / theta.sin()
    };
    gamma * s
}

/// Jacobian of `rot_log` with respect to the 9 matrix entries (column-major),
/// valid for theta comfortably below pi.
///
/// Returns `d log(M) / d vec(M)` as a 3x9 row-major array of rows.
pub fn rot_log_jacobian(m: &Matrix3<f64>) -> [[f64; 9]; 3] {
    let s = Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    let c = 0.5 * (m.trace() - 1.0);
    let n2 = s.norm_squared();
    let n = n2.sqrt();
    let theta = n.atan2(c);
    let d = n2 + c * c;

    // gamma(theta) = theta/sin(theta); need gamma, gamma'/n, gamma'*n.
    let (gamma, gp_over_n, gp_times_n) = if theta < 1e-4 {
        let t2 = theta * theta;
        let gamma = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
        // gamma'(t) = t/3 + 7t^3/90 + ...; n = sin(t) ~ t
        //   gamma'/n -> 1/3 + 2 t^2/15
        let gp_over_n = 1.0 / 3.0 + 2.0 * t2 / 15.0;
        let gp_times_n = (theta / 3.0 + 7.0 * theta * t2 / 90.0) * n;
        (gamma, gp_over_n, gp_times_n)
    } else {
        let st = theta.sin();
        let gamma = theta / st;
        let gp = (st - theta * theta.cos()) / (st * st);
        (gamma, gp / n, gp * n)
    };

    // ds/dM: s_i picks +-1/2 of two antisymmetric entries.
    // column-major vec index of (row r, col cc) is cc*3 + r.
    let idx = |r: usize, cc: usize| cc * 3 + r;
    let mut ds = [[0.0f64; 9]; 3];
    ds[0][idx(2, 1)] = 0.5;
    ds[0][idx(1, 2)] = -0.5;
    ds[1][idx(0, 2)] = 0.5;
    ds[1][idx(2, 0)] = -0.5;
    ds[2][idx(1, 0)] = 0.5;
    ds[2][idx(0, 1)] = -0.5;
    // dc/dM = 1/2 on the diagonal.
    let mut dc = [0.0f64; 9];
    dc[idx(0, 0)] = 0.5;
    dc[idx(1, 1)] = 0.5;
    dc[idx(2, 2)] = 0.5;

    // d theta = (c * dn - n * dc)/d, dn = (s . ds)/n
    // e = gamma s => de = gamma ds + s gamma' dtheta
    //   = gamma ds + s (gamma'/n)(c/d)(s . ds) - s (gamma' n / d) dc
    let k1 = gp_over_n * c / d;
    let k2 = gp_times_n / d;
    let mut out = [[0.0f64; 9]; 3];
    for col in 0..9 {
        let sdots = s.x * ds[0][col] + s.y * ds[1][col] + s.z * ds[2][col];
        for row in 0..3 {
            out[row][col] = gamma * ds[row][col] + s[row] * (k1 * sdots - k2 * dc[col]);
        }
    }
    out
}

/// Right Jacobian of SO(3): `exp([w + dw]) ~= exp([w]) exp([Jr(w) dw])`.
pub fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / (theta * theta),
            (theta - theta.sin()) / (theta * theta * theta),
        )
    };
    Matrix3::identity() - a * k + b * (k * k)
}

/// Nearest rotation matrix in the Frobenius sense (polar decomposition).
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // Flip the axis of least significance.
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

/// Frobenius-norm deviation from orthonormality, `||R^T R - I||_F`.
pub fn orthogonality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// Geodesic angle between two unit quaternions, in [0, pi].
pub fn quat_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let rel = a.inverse() * b;
    let v = rel.vector().norm();
    let w = rel.scalar().abs();
    2.0 * v.atan2(w)
}

/// Integrate a unit quaternion by a body-frame angular velocity over dt.
pub fn quat_integrate(
    q: &UnitQuaternion<f64>,
    omega_body: &Vector3<f64>,
    dt: f64,
) -> UnitQuaternion<f64> {
    let dq = UnitQuaternion::from_scaled_axis(omega_body * dt);
    let mut out = q * dq;
    out.renormalize();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut w = rand_vec(&mut rng, 2.8);
            if w.norm() >= 3.0 {
                w *= 2.9 / w.norm();
            }
            let r = rot_exp(&w, 1.0);
            let back = rot_log(&r);
            assert_relative_eq!(back, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_near_pi() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            for theta in [3.05, 3.14, std::f64::consts::PI - 1e-7] {
                let r = rot_exp(&(axis * theta), 1.0);
                let back = rot_log(&r);
                assert_relative_eq!(back.norm(), theta, epsilon = 1e-6);
                assert_relative_eq!(back.normalize(), axis, epsilon = 1e-5);
            }
        }
        // Mixed axis close to pi.
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        let r = rot_exp(&(axis * 3.1), 1.0);
        assert_relative_eq!(rot_log(&r), axis * 3.1, epsilon = 1e-6);
    }

    #[test]
    fn log_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let w = rand_vec(&mut rng, 1.8);
            let m = rot_exp(&w, 1.0);
            let jac = rot_log_jacobian(&m);
            let h = 1e-7;
            for col in 0..9 {
                let (r, c) = (col % 3, col / 3);
                let mut mp = m;
                mp[(r, c)] += h;
                let mut mm = m;
                mm[(r, c)] -= h;
                let fd = (rot_log(&mp) - rot_log(&mm)) / (2.0 * h);
                for row in 0..3 {
                    assert_relative_eq!(jac[row][col], fd[row], epsilon = 1e-5, max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let w = rand_vec(&mut rng, 2.0);
            let jr = right_jacobian(&w);
            let h = 1e-7;
            let base = rot_exp(&w, 1.0);
            for j in 0..3 {
                let mut dw = Vector3::zeros();
                dw[j] = h;
                let plus = rot_exp(&(w + dw), 1.0);
                // exp(w+dw) ~ exp(w) exp(Jr dw)  =>  log(exp(w)^T exp(w+dw)) ~ Jr dw
                let delta = rot_log(&(base.transpose() * plus)) / h;
                for i in 0..3 {
                    assert_relative_eq!(jr[(i, j)], delta[i], epsilon = 1e-5, max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn orthonormalize_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let r = rot_exp(&rand_vec(&mut rng, 3.0), 1.0);
            let mut noisy = r;
            for i in 0..3 {
                for j in 0..3 {
                    noisy[(i, j)] += rng.gen_range(-1e-4..1e-4);
                }
            }
            let repaired = orthonormalize(&noisy);
            assert!(orthogonality_error(&repaired) < 1e-12);
            assert!(repaired.determinant() > 0.0);
            assert!((repaired - r).norm() < 1e-3);
        }
    }

    #[test]
    fn quat_angle_matches_log_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let wa = rand_vec(&mut rng, 2.5);
            let wb = rand_vec(&mut rng, 2.5);
            let qa = UnitQuaternion::from_scaled_axis(wa);
            let qb = UnitQuaternion::from_scaled_axis(wb);
            let ra = rot_exp(&wa, 1.0);
            let rb = rot_exp(&wb, 1.0);
            let expected = rot_log(&(ra.transpose() * rb)).norm();
            assert_relative_eq!(quat_angle(&qa, &qb), expected, epsilon = 1e-8);
        }
    }
}
