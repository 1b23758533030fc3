//! Single Rigid Body (SRB) model: the robot as one rigid body acted on by
//! point-foot contact forces. Used by the trajectory optimizer as dynamics
//! constraints and by validators as an independent oracle.
//!
//! Discrete dynamics over one step of `dt`:
//!
//! ```text
//! p+  = p + v dt
//! v+  = v + (sum(f_i)/m + g) dt
//! R+  = R exp([w x] dt)
//! w+  = w + I_b^-1 (R^T sum((p_i - p) x f_i) - [w x] I_b w) dt
//! ```
//!
//! with `w` the body-frame angular velocity and `I_b` the diagonal
//! body-frame inertia.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use crate::rot::{rot_exp, rot_log, skew};

/// Model parameters for the simplified dynamics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrbParams {
    /// Total robot mass, kg.
    pub mass: f64,
    /// Diagonal of the body-frame inertia, kg m^2.
    pub body_inertia: Vector3<f64>,
    /// Gravitational acceleration, world frame, m/s^2.
    pub gravity: Vector3<f64>,
    /// Knot spacing, s.
    pub dt: f64,
    /// Ground friction coefficient used by the optimizer.
    pub friction_coeff: f64,
    /// Per-foot cap on the vertical ground reaction force, N.
    pub max_normal_force: f64,
    /// Maximum leg extension (L1 ball radius in the shoulder plane), m.
    pub leg_length: f64,
    /// Shoulder frame origins in the body frame, order FL, FR, HL, HR.
    pub shoulder_offsets: [Vector3<f64>; 4],
}

impl SrbParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass > 0.0) {
            return Err(format!("mass must be positive, got {}", self.mass));
        }
        if self.body_inertia.iter().any(|&v| !(v > 0.0)) {
            return Err(format!(
                "body inertia diagonal must be positive, got {:?}",
                self.body_inertia
            ));
        }
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.friction_coeff > 0.0) {
            return Err("friction coefficient must be positive".into());
        }
        if !(self.leg_length > 0.0) {
            return Err("leg length must be positive".into());
        }
        Ok(())
    }
}

/// Base state of the simplified model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrbState {
    /// World position of the body origin, m.
    pub position: Vector3<f64>,
    /// World linear velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vector3<f64>,
}

impl SrbState {
    /// Checks the rotation invariants: `||R^T R - I||_F <= tol`, `det R > 0`.
    pub fn rotation_ok(&self, tol: f64) -> bool {
        crate::rot::orthogonality_error(&self.rotation) <= tol && self.rotation.determinant() > 0.0
    }
}

/// Foot positions and ground reaction forces at one knot, world frame,
/// order FL, FR, HL, HR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub foot_positions: [Vector3<f64>; 4],
    pub foot_forces: [Vector3<f64>; 4],
}

impl ContactSet {
    pub fn zero_forces(foot_positions: [Vector3<f64>; 4]) -> Self {
        Self {
            foot_positions,
            foot_forces: [Vector3::zeros(); 4],
        }
    }
}

/// One explicit-Euler step of the SRB dynamics (exponential map for R).
pub fn srb_step(state: &SrbState, contacts: &ContactSet, params: &SrbParams) -> SrbState {
    let dt = params.dt;
    let mut force_sum = Vector3::zeros();
    let mut torque_world = Vector3::zeros();
    for i in 0..4 {
        force_sum += contacts.foot_forces[i];
        torque_world += (contacts.foot_positions[i] - state.position).cross(&contacts.foot_forces[i]);
    }
    let inertia = &params.body_inertia;
    let w = state.angular_velocity;
    let inertia_w = Vector3::new(inertia.x * w.x, inertia.y * w.y, inertia.z * w.z);
    let torque_body = state.rotation.transpose() * torque_world - w.cross(&inertia_w);
    let angular_accel = Vector3::new(
        torque_body.x / inertia.x,
        torque_body.y / inertia.y,
        torque_body.z / inertia.z,
    );
    SrbState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity + (force_sum / params.mass + params.gravity) * dt,
        rotation: state.rotation * rot_exp(&w, dt),
        angular_velocity: w + angular_accel * dt,
    }
}

/// Residual of the discrete dynamics between two knots, stacked as
/// `[p; v; rotation log; w]` (12 values). Zero iff `next == srb_step(state)`.
///
/// The rotation component is the 3-vector log map of `R_pred^T R_next`.
pub fn dynamics_residual(
    state: &SrbState,
    next: &SrbState,
    contacts: &ContactSet,
    params: &SrbParams,
) -> [f64; 12] {
    let pred = srb_step(state, contacts, params);
    let rot_res = rot_log(&(pred.rotation.transpose() * next.rotation));
    let mut out = [0.0; 12];
    for i in 0..3 {
        out[i] = next.position[i] - pred.position[i];
        out[3 + i] = next.velocity[i] - pred.velocity[i];
        out[6 + i] = rot_res[i];
        out[9 + i] = next.angular_velocity[i] - pred.angular_velocity[i];
    }
    out
}

/// Open-loop rollout: applies `srb_step` once per contact set.
/// Output length is `contact_sequence.len() + 1` (initial state included).
pub fn srb_rollout(
    initial: &SrbState,
    contact_sequence: &[ContactSet],
    params: &SrbParams,
) -> Vec<SrbState> {
    let mut out = Vec::with_capacity(contact_sequence.len() + 1);
    out.push(initial.clone());
    for contacts in contact_sequence {
        let next = srb_step(out.last().unwrap(), contacts, params);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn test_params() -> SrbParams {
        SrbParams {
            mass: 2.5,
            body_inertia: Vector3::new(0.011, 0.036, 0.042),
            gravity: Vector3::new(0.0, 0.0, -9.81),
            dt: 0.02,
            friction_coeff: 0.8,
            max_normal_force: 40.0,
            leg_length: 0.32,
            shoulder_offsets: [
                Vector3::new(0.19, 0.1046, 0.0),
                Vector3::new(0.19, -0.1046, 0.0),
                Vector3::new(-0.19, 0.1046, 0.0),
                Vector3::new(-0.19, -0.1046, 0.0),
            ],
        }
    }

    fn rand_vec(rng: &mut impl Rng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
    }

    fn rand_state(rng: &mut impl Rng) -> SrbState {
        SrbState {
            position: rand_vec(rng, 1.0),
            velocity: rand_vec(rng, 2.0),
            rotation: rot_exp(&rand_vec(rng, 2.5), 1.0),
            angular_velocity: rand_vec(rng, 5.0),
        }
    }

    fn rand_contacts(rng: &mut impl Rng) -> ContactSet {
        ContactSet {
            foot_positions: [
                rand_vec(rng, 0.5),
                rand_vec(rng, 0.5),
                rand_vec(rng, 0.5),
                rand_vec(rng, 0.5),
            ],
            foot_forces: [
                rand_vec(rng, 20.0),
                rand_vec(rng, 20.0),
                rand_vec(rng, 20.0),
                rand_vec(rng, 20.0),
            ],
        }
    }

    #[test]
    fn skew_definition() {
        let m = skew(&Vector3::new(0.0, 0.0, 1.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(m, expected);
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn skew_matches_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = rand_vec(&mut rng, 10.0);
            let v = rand_vec(&mut rng, 10.0);
            // Componentwise cross-product oracle.
            let cross = Vector3::new(
                w.y * v.z - w.z * v.y,
                w.z * v.x - w.x * v.z,
                w.x * v.y - w.y * v.x,
            );
            assert_relative_eq!(skew(&w) * v, cross, epsilon = 1e-14);
            assert_relative_eq!(skew(&w) + skew(&w).transpose(), Matrix3::zeros());
        }
    }

    #[test]
    fn rot_exp_quarter_turn() {
        let r = rot_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), 1.0);
        assert_relative_eq!(r * Vector3::x(), Vector3::y(), epsilon = 1e-12);
        assert_eq!(rot_exp(&Vector3::zeros(), 1.0), Matrix3::identity());
    }

    /// Truncated power-series oracle for the matrix exponential.
    fn exp_series(w: &Vector3<f64>, dt: f64) -> Matrix3<f64> {
        let a = skew(w) * dt;
        let mut term = Matrix3::identity();
        let mut sum = Matrix3::identity();
        for k in 1..=20 {
            term = term * a / (k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn rot_exp_matches_power_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let w = rand_vec(&mut rng, 3.0);
            // Keep ||w dt|| small enough that the 20-term series is itself
            // accurate to well below the comparison tolerance.
            let dt = rng.gen_range(0.001f64..1.0).min(2.5 / w.norm().max(1e-9));
            let r = rot_exp(&w, dt);
            assert_relative_eq!(r, exp_series(&w, dt), epsilon = 1e-10);
        }
    }

    #[test]
    fn rot_exp_is_proper_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let w = rand_vec(&mut rng, 10.0);
            let dt = rng.gen_range(0.0..1.0);
            if w.norm() * dt > 10.0 {
                continue;
            }
            let r = rot_exp(&w, dt);
            assert!(crate::rot::orthogonality_error(&r) <= 1e-10);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn free_fall_step() {
        let params = test_params();
        let state = SrbState {
            position: Vector3::new(0.1, 0.2, 1.0),
            velocity: Vector3::new(0.3, 0.0, 0.5),
            rotation: rot_exp(&Vector3::new(0.2, 0.1, -0.4), 1.0),
            angular_velocity: Vector3::zeros(),
        };
        let contacts = ContactSet::zero_forces([Vector3::zeros(); 4]);
        let next = srb_step(&state, &contacts, &params);
        assert_relative_eq!(next.velocity, state.velocity + params.gravity * params.dt);
        assert_relative_eq!(next.position, state.position + state.velocity * params.dt);
        assert_eq!(next.rotation, state.rotation);
        assert_eq!(next.angular_velocity, Vector3::zeros());
    }

    #[test]
    fn static_force_balance() {
        let params = test_params();
        let state = SrbState {
            position: Vector3::new(0.0, 0.0, 0.25),
            velocity: Vector3::new(0.1, -0.2, 0.0),
            rotation: Matrix3::identity(),
            angular_velocity: Vector3::zeros(),
        };
        // One foot directly at the body origin: zero lever arm.
        let mut contacts = ContactSet::zero_forces([state.position; 4]);
        contacts.foot_forces[0] = Vector3::new(0.0, 0.0, params.mass * 9.81);
        let next = srb_step(&state, &contacts, &params);
        assert_relative_eq!(next.velocity, state.velocity, epsilon = 1e-15);
        assert_eq!(next.angular_velocity, Vector3::zeros());
    }

    #[test]
    fn torque_from_offset_foot() {
        // Hand evaluation: r = (0.1,0,0), f = (0,0,10) => torque (0,-1,0);
        // w+ = I^-1 torque dt = (0, -1/0.02/... ) with I_yy = 0.02, dt = 0.02 => (0,-1,0).
        let mut params = test_params();
        params.body_inertia = Vector3::new(0.01, 0.02, 0.03);
        let state = SrbState {
            position: Vector3::new(0.0, 0.0, 0.3),
            velocity: Vector3::zeros(),
            rotation: Matrix3::identity(),
            angular_velocity: Vector3::zeros(),
        };
        let mut contacts = ContactSet::zero_forces([state.position; 4]);
        contacts.foot_positions[0] = state.position + Vector3::new(0.1, 0.0, 0.0);
        contacts.foot_forces[0] = Vector3::new(0.0, 0.0, 10.0);
        let next = srb_step(&state, &contacts, &params);
        assert_relative_eq!(next.angular_velocity, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn linear_momentum_update_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = test_params();
        for _ in 0..100 {
            let state = rand_state(&mut rng);
            let contacts = rand_contacts(&mut rng);
            let next = srb_step(&state, &contacts, &params);
            let mut force_sum = Vector3::zeros();
            for f in &contacts.foot_forces {
                force_sum += f;
            }
            // Componentwise bitwise equality with the same arithmetic.
            let expected = state.velocity + (force_sum / params.mass + params.gravity) * params.dt;
            assert_eq!(next.velocity, expected);
        }
    }

    #[test]
    fn residual_zero_on_consistent_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = test_params();
        for _ in 0..200 {
            let state = rand_state(&mut rng);
            let contacts = rand_contacts(&mut rng);
            let next = srb_step(&state, &contacts, &params);
            let res = dynamics_residual(&state, &next, &contacts, &params);
            for v in res {
                assert!(v.abs() <= 1e-12, "residual component {v}");
            }
        }
    }

    #[test]
    fn residual_linear_in_position_perturbation() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let state = rand_state(&mut rng);
        let contacts = rand_contacts(&mut rng);
        let mut next = srb_step(&state, &contacts, &params);
        let eps = 3.5e-4;
        next.position.x += eps;
        let res = dynamics_residual(&state, &next, &contacts, &params);
        let norm: f64 = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(norm, eps, epsilon = 1e-12);
    }

    #[test]
    fn residual_matches_direct_subtraction_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = test_params();
        for _ in 0..100 {
            let a = rand_state(&mut rng);
            let b = rand_state(&mut rng);
            let contacts = rand_contacts(&mut rng);
            let res = dynamics_residual(&a, &b, &contacts, &params);
            // Independent recomputation of the step.
            let pred = srb_step(&a, &contacts, &params);
            let rot = rot_log(&(pred.rotation.transpose() * b.rotation));
            for i in 0..3 {
                assert_relative_eq!(res[i], b.position[i] - pred.position[i]);
                assert_relative_eq!(res[3 + i], b.velocity[i] - pred.velocity[i]);
                assert_relative_eq!(res[6 + i], rot[i]);
                assert_relative_eq!(res[9 + i], b.angular_velocity[i] - pred.angular_velocity[i]);
            }
        }
    }

    #[test]
    fn rollout_ballistic_matches_closed_form() {
        let params = test_params();
        let initial = SrbState {
            position: Vector3::new(0.0, 0.0, 2.0),
            velocity: Vector3::zeros(),
            rotation: Matrix3::identity(),
            angular_velocity: Vector3::zeros(),
        };
        let seq = vec![ContactSet::zero_forces([Vector3::zeros(); 4]); 50];
        let states = srb_rollout(&initial, &seq, &params);
        assert_eq!(states.len(), 51);
        for (k, s) in states.iter().enumerate() {
            let t = k as f64 * params.dt;
            let exact = 2.0 - 0.5 * 9.81 * t * t;
            // Explicit Euler lags the closed form by up to g dt t / 2.
            let bound = 0.5 * 9.81 * params.dt * t + 1e-12;
            assert!(
                (s.position.z - exact).abs() <= bound,
                "knot {k}: {} vs {exact}",
                s.position.z
            );
        }
        // Single step equals srb_step.
        let one = srb_rollout(&initial, &seq[..1], &params);
        assert_eq!(one[1], srb_step(&initial, &seq[0], &params));
    }

    #[test]
    fn step_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = test_params();
        let state = rand_state(&mut rng);
        let contacts = rand_contacts(&mut rng);
        let a = srb_step(&state, &contacts, &params);
        let b = srb_step(&state, &contacts, &params);
        assert_eq!(a, b);
    }
}
