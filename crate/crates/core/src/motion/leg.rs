//! Planar two-link leg kinematics in the shoulder x-z plane.
//!
//! Conventions: zero joint angles mean the leg is fully extended straight
//! down, so `fk(0, 0) = (0, -(l1 + l2))`. The hip angle swings the leg
//! toward +x for non-mirrored legs; `mirror` flips the x direction (the
//! convention used for the hind pair). The knee bend sign is fixed to the
//! "knee backward" branch: the IK always returns `knee <= 0` in the leg's
//! own frame.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegGeometry {
    /// Upper link length l1, m.
    pub upper_length: f64,
    /// Lower link length l2, m.
    pub lower_length: f64,
    /// Shoulder frame origin in the body frame, m.
    pub shoulder_offset: Vector3<f64>,
    /// Flips the x direction of the shoulder plane.
    pub mirror: bool,
}

impl LegGeometry {
    pub fn validate(&self, leg_length: f64) -> Result<(), String> {
        if !(self.upper_length > 0.0 && self.lower_length > 0.0) {
            return Err("leg link lengths must be positive".into());
        }
        if leg_length > self.upper_length + self.lower_length + 1e-12 {
            return Err(format!(
                "leg_length {} exceeds reach {}",
                leg_length,
                self.upper_length + self.lower_length
            ));
        }
        Ok(())
    }

    fn sign(&self) -> f64 {
        if self.mirror {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("target at radius {radius:.6} outside reachable annulus [{inner:.6}, {outer:.6}]")]
    Unreachable {
        radius: f64,
        inner: f64,
        outer: f64,
    },
}

/// Forward kinematics: joint angles (hip, knee) to foot (x, z) in the
/// shoulder plane.
pub fn leg_fk(angles: &Vector2<f64>, geom: &LegGeometry) -> Vector2<f64> {
    let s = geom.sign();
    let (l1, l2) = (geom.upper_length, geom.lower_length);
    let a1 = angles.x;
    let a12 = angles.x + angles.y;
    Vector2::new(
        s * (l1 * a1.sin() + l2 * a12.sin()),
        -(l1 * a1.cos() + l2 * a12.cos()),
    )
}

/// Inverse kinematics with the knee-backward branch. The hip angle is
/// wrapped into (-pi, pi].
pub fn leg_ik(target: &Vector2<f64>, geom: &LegGeometry) -> Result<Vector2<f64>, IkError> {
    let (l1, l2) = (geom.upper_length, geom.lower_length);
    let x = geom.sign() * target.x;
    let z = target.y;
    let r2 = x * x + z * z;
    let r = r2.sqrt();
    let outer = l1 + l2;
    let inner = (l1 - l2).abs();
    if r > outer + 1e-9 || r < inner - 1e-9 {
        return Err(IkError::Unreachable {
            radius: r,
            inner,
            outer,
        });
    }
    let cos_knee = ((r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = -cos_knee.acos();
    let mut hip = x.atan2(-z) - (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
    if hip > std::f64::consts::PI {
        hip -= 2.0 * std::f64::consts::PI;
    } else if hip <= -std::f64::consts::PI {
        hip += 2.0 * std::f64::consts::PI;
    }
    Ok(Vector2::new(hip, knee))
}

/// Jacobian of the foot (x, z) with respect to (hip, knee).
pub fn leg_jacobian(angles: &Vector2<f64>, geom: &LegGeometry) -> Matrix2<f64> {
    let s = geom.sign();
    let (l1, l2) = (geom.upper_length, geom.lower_length);
    let a1 = angles.x;
    let a12 = angles.x + angles.y;
    Matrix2::new(
        s * (l1 * a1.cos() + l2 * a12.cos()),
        s * l2 * a12.cos(),
        l1 * a1.sin() + l2 * a12.sin(),
        l2 * a12.sin(),
    )
}

/// Feedforward joint torques from ground reaction forces: per leg
/// `tau = J^T (-f_planar)`, with `f_planar` the world force rotated into the
/// body frame and projected onto the shoulder x-z plane.
pub fn feedforward_torques(
    angles: &[f64; 8],
    forces: &[Vector3<f64>; 4],
    rotation: &nalgebra::Matrix3<f64>,
    geometry: &[LegGeometry; 4],
) -> [f64; 8] {
    let mut out = [0.0; 8];
    for leg in 0..4 {
        let f_body = rotation.transpose() * forces[leg];
        let f_planar = Vector2::new(f_body.x, f_body.z);
        let q = Vector2::new(angles[2 * leg], angles[2 * leg + 1]);
        let tau = leg_jacobian(&q, &geometry[leg]).transpose() * (-f_planar);
        out[2 * leg] = tau.x;
        out[2 * leg + 1] = tau.y;
    }
    out
}
