//! Motion synthesis toolkit for point-foot quadrupeds.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`trajopt`] — contact-implicit trajectory optimization over a single
//!    rigid body (SRB) model, driven by a hand-authored kinematic sketch.
//!    Complementarity is handled by a relaxation homotopy solved with the
//!    augmented-Lagrangian NLP solver in [`nlp`].
//! 2. [`motion`] — post-processing of SRB solutions into phase-indexed
//!    joint-space reference motions (IK, finite-difference velocities,
//!    Jacobian-transpose feedforward torques).
//! 3. [`env`] + [`ppo`] — an imitation RL environment stepping the
//!    full-order simulator in [`sim`] at 1 kHz under a 50 Hz residual
//!    policy, trained with PPO.
//!
//! [`srb`] holds the shared simplified-model dynamics used both by the
//! optimizer (as constraints) and by validators (as an oracle).

pub mod env;
pub mod io;
pub mod motion;
pub mod nlp;
pub mod ppo;
pub mod rot;
pub mod sim;
pub mod srb;
pub mod trajopt;

pub use srb::{ContactSet, SrbParams, SrbState};
pub use trajopt::{KinematicSketch, SrbTrajectory, TrajOptConfig};
pub use motion::{LegGeometry, ReferenceFrame, ReferenceMotion};
pub use sim::{RobotModel, SimState, TerrainParams};
pub use env::{EnvConfig, FeedforwardConfig};
pub use ppo::{PolicyParams, TrainConfig};
