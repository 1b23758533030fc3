//! Phase-indexed joint-space reference motions and their construction from
//! optimized SRB trajectories.

use super::leg::{feedforward_torques, leg_ik, IkError, LegGeometry};
use crate::trajopt::SrbTrajectory;
use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One 50 Hz frame of the reference motion. Joint order is
/// FL hip, FL knee, FR hip, FR knee, HL hip, HL knee, HR hip, HR knee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub base_position: Vector3<f64>,
    pub base_rotation: UnitQuaternion<f64>,
    pub joint_angles: [f64; 8],
    pub joint_velocities: [f64; 8],
    pub joint_torques: [f64; 8],
    pub contact_flags: [bool; 4],
}

/// Phase-indexed reference motion at fixed 20 ms spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMotion {
    pub dt: f64,
    pub duration: f64,
    pub loopable: bool,
    /// Hash of the leg geometry used to build the motion (provenance).
    pub geometry_hash: String,
    pub frames: Vec<ReferenceFrame>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("knot {knot} foot {foot}: {source}")]
    Unreachable {
        knot: usize,
        foot: usize,
        source: IkError,
    },
    #[error("trajectory has fewer than two knots")]
    TooShort,
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("phase {phase} outside [0, {duration}] of a non-loopable motion")]
    OutOfRange { phase: f64, duration: f64 },
}

/// Central finite differences in the interior, one-sided at the ends.
/// Output length equals input length.
pub fn finite_diff_velocities<const N: usize>(seq: &[[f64; N]], dt: f64) -> Vec<[f64; N]> {
    assert!(seq.len() >= 2, "need at least two frames");
    let n = seq.len();
    let mut out = vec![[0.0; N]; n];
    for j in 0..N {
        out[0][j] = (seq[1][j] - seq[0][j]) / dt;
        out[n - 1][j] = (seq[n - 1][j] - seq[n - 2][j]) / dt;
    }
    for k in 1..n - 1 {
        for j in 0..N {
            out[k][j] = (seq[k + 1][j] - seq[k - 1][j]) / (2.0 * dt);
        }
    }
    out
}

/// Radial clamp margin tolerated before IK failures propagate; matches the
/// optimizer's kinematic feasibility tolerance with headroom.
const IK_CLAMP: f64 = 1e-5;

/// Converts an optimized trajectory into a joint-space reference motion:
/// per knot the feet are transformed into their shoulder frames, solved by
/// IK, joint velocities come from central differences, and feedforward
/// torques from the Jacobian transpose of the knot's contact forces.
pub fn build_reference(
    trajectory: &SrbTrajectory,
    geometry: &[LegGeometry; 4],
) -> Result<ReferenceMotion, BuildError> {
    if trajectory.knots.len() < 2 {
        return Err(BuildError::TooShort);
    }
    let dt = trajectory.params.dt;
    let n = trajectory.knots.len();

    let mut angles: Vec<[f64; 8]> = Vec::with_capacity(n);
    let mut rotations: Vec<UnitQuaternion<f64>> = Vec::with_capacity(n);
    for (k, knot) in trajectory.knots.iter().enumerate() {
        let state = &knot.state;
        let mut q = [0.0; 8];
        for foot in 0..4 {
            let body = state.rotation.transpose()
                * (knot.contacts.foot_positions[foot] - state.position)
                - geometry[foot].shoulder_offset;
            let mut target = Vector2::new(body.x, body.z);
            let reach = geometry[foot].upper_length + geometry[foot].lower_length;
            let r = target.norm();
            if r > reach && r <= reach + IK_CLAMP {
                target *= (reach - 1e-12) / r;
            }
            let leg_q = leg_ik(&target, &geometry[foot]).map_err(|source| {
                BuildError::Unreachable {
                    knot: k,
                    foot,
                    source,
                }
            })?;
            q[2 * foot] = leg_q.x;
            q[2 * foot + 1] = leg_q.y;
        }
        angles.push(q);

        let mut quat = UnitQuaternion::from_matrix(&state.rotation);
        // Keep the quaternion sequence on one cover for interpolation.
        if let Some(prev) = rotations.last() {
            if prev.coords.dot(&quat.coords) < 0.0 {
                quat = UnitQuaternion::new_unchecked(-quat.into_inner());
            }
        }
        rotations.push(quat);
    }

    let velocities = finite_diff_velocities(&angles, dt);

    let mut frames = Vec::with_capacity(n);
    for (k, knot) in trajectory.knots.iter().enumerate() {
        let torques = feedforward_torques(
            &angles[k],
            &knot.contacts.foot_forces,
            &knot.state.rotation,
            geometry,
        );
        let mut contact_flags = [false; 4];
        for foot in 0..4 {
            contact_flags[foot] = knot.contacts.foot_forces[foot].z > 1e-6;
        }
        frames.push(ReferenceFrame {
            base_position: knot.state.position,
            base_rotation: rotations[k],
            joint_angles: angles[k],
            joint_velocities: velocities[k],
            joint_torques: torques,
            contact_flags,
        });
    }

    Ok(ReferenceMotion {
        dt,
        duration: (n - 1) as f64 * dt,
        loopable: trajectory.loopable,
        geometry_hash: crate::io::hash_of(geometry),
        frames,
    })
}

impl ReferenceMotion {
    pub fn validate(&self) -> Result<(), String> {
        let expected = (self.duration / self.dt).round() as usize + 1;
        if self.frames.len() != expected {
            return Err(format!(
                "frame count {} != round(T/dt)+1 = {expected}",
                self.frames.len()
            ));
        }
        for (k, f) in self.frames.iter().enumerate() {
            for (j, &a) in f.joint_angles.iter().enumerate() {
                if a.abs() > std::f64::consts::PI + 1e-9 {
                    return Err(format!("frame {k} joint {j}: angle {a} outside [-pi, pi]"));
                }
            }
        }
        Ok(())
    }

    /// Largest per-joint velocity and torque magnitudes; the headline
    /// diagnostic for finite-difference post-processing artifacts.
    pub fn peak_velocity_and_torque(&self) -> (f64, f64) {
        let mut vmax: f64 = 0.0;
        let mut tmax: f64 = 0.0;
        for f in &self.frames {
            for j in 0..8 {
                vmax = vmax.max(f.joint_velocities[j].abs());
                tmax = tmax.max(f.joint_torques[j].abs());
            }
        }
        (vmax, tmax)
    }

    /// Phases (s) at which a foot's reference contact flag flips, per foot.
    pub fn contact_transitions(&self) -> [Vec<f64>; 4] {
        let mut out: [Vec<f64>; 4] = Default::default();
        for foot in 0..4 {
            for k in 1..self.frames.len() {
                if self.frames[k].contact_flags[foot] != self.frames[k - 1].contact_flags[foot] {
                    out[foot].push(k as f64 * self.dt);
                }
            }
            if self.loopable
                && !self.frames.is_empty()
                && self.frames[0].contact_flags[foot]
                    != self.frames[self.frames.len() - 1].contact_flags[foot]
            {
                out[foot].push(self.duration);
            }
        }
        out
    }
}

/// Samples the motion at an arbitrary phase: linear interpolation for the
/// vector fields, spherical interpolation for the base rotation, and
/// nearest-frame contact flags. Loopable motions wrap modulo the duration.
pub fn sample_reference(
    motion: &ReferenceMotion,
    phase: f64,
) -> Result<ReferenceFrame, SampleError> {
    let mut phase = phase;
    if motion.loopable {
        phase = phase.rem_euclid(motion.duration);
    } else if phase < -1e-12 || phase > motion.duration + 1e-9 {
        return Err(SampleError::OutOfRange {
            phase,
            duration: motion.duration,
        });
    }
    let phase = phase.clamp(0.0, motion.duration);
    let pos = phase / motion.dt;
    let k = (pos.floor() as usize).min(motion.frames.len() - 1);
    let t = pos - k as f64;
    if t <= 1e-12 || k + 1 >= motion.frames.len() {
        return Ok(motion.frames[k].clone());
    }
    let a = &motion.frames[k];
    let b = &motion.frames[k + 1];
    let lerp8 = |x: &[f64; 8], y: &[f64; 8]| {
        let mut out = [0.0; 8];
        for j in 0..8 {
            out[j] = x[j] + t * (y[j] - x[j]);
        }
        out
    };
    // Shortest-path slerp; frames are sign-aligned at build time but sampled
    // motions may have been edited.
    let qb = if a.base_rotation.coords.dot(&b.base_rotation.coords) < 0.0 {
        UnitQuaternion::new_unchecked(-b.base_rotation.into_inner())
    } else {
        b.base_rotation
    };
    let rotation = a
        .base_rotation
        .try_slerp(&qb, t, 1e-12)
        .unwrap_or(a.base_rotation);
    Ok(ReferenceFrame {
        base_position: a.base_position + t * (b.base_position - a.base_position),
        base_rotation: rotation,
        joint_angles: lerp8(&a.joint_angles, &b.joint_angles),
        joint_velocities: lerp8(&a.joint_velocities, &b.joint_velocities),
        joint_torques: lerp8(&a.joint_torques, &b.joint_torques),
        contact_flags: if t < 0.5 {
            a.contact_flags
        } else {
            b.contact_flags
        },
    })
}
