//! Kinematic sketches, optimizer configuration, and the optimized
//! trajectory container.

use crate::nlp::SolverConfig;
use crate::srb::{ContactSet, SrbParams, SrbState};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// One hand-authored knot: coarse targets plus the contact/force guess that
/// seeds the optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SketchKnot {
    pub target_position: Vector3<f64>,
    pub target_rotation: Matrix3<f64>,
    pub target_foot_positions: [Vector3<f64>; 4],
    pub contact_flags: [bool; 4],
    pub guess_forces: [Vector3<f64>; 4],
}

/// A coarse, hand-authored motion description. Serves both as the tracking
/// objective and as the initial guess; convergence relies on the guess
/// forces being nonzero wherever a foot is flagged in contact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinematicSketch {
    pub name: String,
    /// Total duration T, s. Knot count must be `round(T/dt) + 1`.
    pub duration: f64,
    /// Carried through to the reference motion (phase wrapping).
    pub loopable: bool,
    pub knots: Vec<SketchKnot>,
}

impl KinematicSketch {
    pub fn validate(&self, params: &SrbParams) -> Result<(), String> {
        let expected = (self.duration / params.dt).round() as usize + 1;
        if self.knots.len() != expected {
            return Err(format!(
                "sketch '{}': knot count {} != round(T/dt)+1 = {expected}",
                self.name,
                self.knots.len()
            ));
        }
        for (k, knot) in self.knots.iter().enumerate() {
            for i in 0..4 {
                if knot.contact_flags[i] && !(knot.guess_forces[i].z > 0.0) {
                    return Err(format!(
                        "sketch '{}': knot {k} foot {i} flagged in contact but guess normal force is {}; \
                         the optimizer needs a nonzero normal guess wherever a foot is on the ground",
                        self.name, knot.guess_forces[i].z
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Optimizer configuration: tracking weights, per-motion structure flags,
/// and the complementarity relaxation schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajOptConfig {
    /// Tracking weight on base position error.
    pub position_weight: f64,
    /// Tracking weight on the rotation log-map error.
    pub rotation_weight: f64,
    /// Tracking weight on foot position error.
    pub foot_weight: f64,
    /// Diagonal of the foot smoothing regularizer R_pdot.
    pub foot_smooth_weight: Vector3<f64>,
    /// Tie left/right foot pairs (positions and forces, body frame).
    pub symmetry: bool,
    /// Constrain base motion and feet to the x-z plane.
    pub sagittal_only: bool,
    /// Complementarity relaxation values, strictly decreasing.
    pub relaxation_schedule: Vec<f64>,
    pub solver: SolverConfig,
}

impl Default for TrajOptConfig {
    fn default() -> Self {
        Self {
            position_weight: 10.0,
            rotation_weight: 5.0,
            foot_weight: 1.0,
            foot_smooth_weight: Vector3::new(0.1, 0.1, 0.1),
            symmetry: false,
            sagittal_only: false,
            relaxation_schedule: vec![1.0, 0.1, 0.01, 1e-3, 1e-4],
            solver: SolverConfig::default(),
        }
    }
}

impl TrajOptConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.position_weight < 0.0 || self.rotation_weight < 0.0 || self.foot_weight < 0.0 {
            return Err("tracking weights must be nonnegative".into());
        }
        if self.foot_smooth_weight.iter().any(|&w| w < 0.0) {
            return Err("foot smoothing weights must be nonnegative".into());
        }
        if self.relaxation_schedule.is_empty() {
            return Err("relaxation schedule must be nonempty".into());
        }
        for pair in self.relaxation_schedule.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err("relaxation schedule must be strictly decreasing".into());
            }
        }
        let last = *self.relaxation_schedule.last().unwrap();
        if !(last <= 1e-4) {
            return Err(format!("final relaxation {last} must be <= 1e-4"));
        }
        self.solver.validate()
    }
}

/// Per-family maximum residuals of a trajectory, measured in physical units
/// by the unrelaxed constraint definitions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub dynamics: f64,
    pub complementarity: f64,
    pub friction: f64,
    /// Leg-extension L1 ball violations.
    pub kinematic: f64,
    /// Out-of-plane foot offset |b_y| in the shoulder frames. The planar
    /// IK ignores this component; it is audited against a looser bound.
    pub shoulder_plane: f64,
    /// Worst `||R^T R - I||_F` over knots (after any repair).
    pub rotation_orthogonality: f64,
    pub passed: bool,
    /// `(epsilon, exact complementarity residual)` after each homotopy stage.
    pub stages: Vec<(f64, f64)>,
}

/// One optimized knot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryKnot {
    pub state: SrbState,
    pub contacts: ContactSet,
}

/// Solution of the trajectory optimization at the sketch's knot spacing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrbTrajectory {
    pub params: SrbParams,
    pub loopable: bool,
    pub knots: Vec<TrajectoryKnot>,
    pub feasibility: FeasibilityReport,
}

impl SrbTrajectory {
    pub fn duration(&self) -> f64 {
        (self.knots.len() - 1) as f64 * self.params.dt
    }
}

/// Validation thresholds for [`FeasibilityReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationTolerances {
    pub dynamics: f64,
    pub complementarity: f64,
    pub friction: f64,
    pub kinematic: f64,
    pub shoulder_plane: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            dynamics: 1e-4,
            complementarity: 1e-4,
            friction: 1e-6,
            kinematic: 1e-6,
            shoulder_plane: 1e-3,
        }
    }
}
