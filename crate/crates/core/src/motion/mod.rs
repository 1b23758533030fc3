//! Post-processing of SRB trajectories into phase-indexed joint-space
//! reference motions: per-leg inverse kinematics, finite-difference
//! velocities, and Jacobian-transpose feedforward torques.

mod leg;
mod reference;

pub use leg::{feedforward_torques, leg_fk, leg_ik, leg_jacobian, IkError, LegGeometry};
pub use reference::{
    build_reference, finite_diff_velocities, sample_reference, BuildError, ReferenceFrame,
    ReferenceMotion, SampleError,
};
