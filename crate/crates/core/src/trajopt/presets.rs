//! Shipped motion sketches: standing and an in-place hop for fast tests,
//! plus the four production motions (trot, front-hop, 180-backflip,
//! biped-step) at their full durations.
//!
//! Sketches are coarse by intent: they specify plausible poses and contact
//! phasing with nonzero force guesses wherever a foot is down, and leave
//! dynamic consistency to the optimizer.

use super::sketch::{KinematicSketch, SketchKnot, TrajOptConfig};
use crate::rot::rot_exp;
use crate::srb::SrbParams;
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

/// A sketch bundled with the configuration and model it was authored for.
#[derive(Debug, Clone)]
pub struct Preset {
    pub sketch: KinematicSketch,
    pub config: TrajOptConfig,
    pub params: SrbParams,
}

/// Default model parameters for the 2.5 kg point-foot quadruped the
/// presets are authored against (ODRI-Solo-class dimensions, editable via
/// the robot config file).
pub fn default_params() -> SrbParams {
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

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &[
        "standing",
        "hop",
        "trot",
        "trot-2s",
        "front-hop",
        "backflip",
        "biped-step",
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    match name {
        "standing" => Some(standing()),
        "hop" => Some(hop()),
        "trot" => Some(trot(10.0)),
        "trot-2s" => Some(trot(2.0)),
        "front-hop" => Some(front_hop()),
        "backflip" => Some(backflip()),
        "biped-step" => Some(biped_step()),
        _ => None,
    }
}

const STAND_HEIGHT: f64 = 0.24;

fn smooth01(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    0.5 - 0.5 * (PI * s).cos()
}

/// Eased ramp from 0 at t0 to 1 at t1.
fn ramp(t: f64, t0: f64, t1: f64) -> f64 {
    smooth01((t - t0) / (t1 - t0))
}

fn weight_per_foot(params: &SrbParams) -> f64 {
    params.mass * 9.81 / 4.0
}

/// Nominal ground foothold below shoulder i.
fn foothold(params: &SrbParams, i: usize) -> Vector3<f64> {
    Vector3::new(
        params.shoulder_offsets[i].x,
        params.shoulder_offsets[i].y,
        0.0,
    )
}

fn knot_count(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize + 1
}

fn build_sketch(
    name: &str,
    duration: f64,
    loopable: bool,
    params: &SrbParams,
    mut knot_at: impl FnMut(f64) -> SketchKnot,
) -> KinematicSketch {
    let n = knot_count(duration, params.dt);
    let knots = (0..n).map(|k| knot_at(k as f64 * params.dt)).collect();
    KinematicSketch {
        name: name.to_string(),
        duration,
        loopable,
        knots,
    }
}

fn standing() -> Preset {
    let params = default_params();
    let wpf = weight_per_foot(&params);
    let sketch = build_sketch("standing", 1.0, true, &params, |_t| SketchKnot {
        target_position: Vector3::new(0.0, 0.0, STAND_HEIGHT),
        target_rotation: Matrix3::identity(),
        target_foot_positions: std::array::from_fn(|i| foothold(&params, i)),
        contact_flags: [true; 4],
        guess_forces: [Vector3::new(0.0, 0.0, wpf); 4],
    });
    Preset {
        sketch,
        config: TrajOptConfig::default(),
        params,
    }
}

/// In-place vertical hop: crouch, push, 0.26 s of flight, land, settle.
fn hop() -> Preset {
    let params = default_params();
    let wpf = weight_per_foot(&params);
    let (t_crouch, t_push, t_lift, t_land) = (0.10, 0.28, 0.40, 0.66);
    let crouch = 0.19;
    let push_top = 0.26;
    let flight = t_land - t_lift;
    let v0 = 9.81 * flight / 2.0;

    let base_z = move |t: f64| -> f64 {
        if t < t_crouch {
            STAND_HEIGHT
        } else if t < t_push {
            STAND_HEIGHT + (crouch - STAND_HEIGHT) * ramp(t, t_crouch, t_push)
        } else if t < t_lift {
            crouch + (push_top - crouch) * ramp(t, t_push, t_lift)
        } else if t < t_land {
            let tau = t - t_lift;
            push_top + v0 * tau - 0.5 * 9.81 * tau * tau
        } else {
            push_top + (STAND_HEIGHT - push_top) * ramp(t, t_land, 0.9)
        }
    };

    let sketch = build_sketch("hop", 1.0, false, &params, |t| {
        let z = base_z(t);
        let in_contact = !(t_lift..t_land).contains(&t);
        let foot_z = (z - STAND_HEIGHT).max(0.0);
        let force = if !in_contact {
            0.0
        } else if (t_push..t_lift).contains(&t) {
            2.2 * wpf
        } else if (t_land..t_land + 0.14).contains(&t) {
            1.5 * wpf
        } else {
            wpf
        };
        SketchKnot {
            target_position: Vector3::new(0.0, 0.0, z),
            target_rotation: Matrix3::identity(),
            target_foot_positions: std::array::from_fn(|i| {
                let mut f = foothold(&params, i);
                f.z = if in_contact { 0.0 } else { foot_z };
                f
            }),
            contact_flags: [in_contact; 4],
            guess_forces: [Vector3::new(0.0, 0.0, force); 4],
        }
    });
    Preset {
        sketch,
        config: TrajOptConfig::default(),
        params,
    }
}

/// In-place trot: diagonal pairs (FL,HR) and (FR,HL) alternate stance every
/// half period. Loopable; durations must hold an integer period count.
fn trot(duration: f64) -> Preset {
    let params = default_params();
    let wpf = weight_per_foot(&params);
    let period = 0.5;
    let half = period / 2.0;
    let lift = 0.03;
    assert!(
        (duration / period - (duration / period).round()).abs() < 1e-9,
        "trot duration must be an integer number of periods"
    );

    let sketch = build_sketch("trot", duration, true, &params, |t| {
        let tau = t.rem_euclid(period);
        // Pair A = FL(0), HR(3); pair B = FR(1), HL(2).
        let pair_a_stance = tau < half;
        let stance_of = |i: usize| -> bool {
            let in_a = i == 0 || i == 3;
            in_a == pair_a_stance
        };
        let swing_progress = if pair_a_stance { tau / half } else { (tau - half) / half };
        SketchKnot {
            target_position: Vector3::new(0.0, 0.0, STAND_HEIGHT),
            target_rotation: Matrix3::identity(),
            target_foot_positions: std::array::from_fn(|i| {
                let mut f = foothold(&params, i);
                if !stance_of(i) {
                    f.z = lift * (PI * swing_progress).sin().max(0.0);
                }
                f
            }),
            contact_flags: std::array::from_fn(stance_of),
            guess_forces: std::array::from_fn(|i| {
                if stance_of(i) {
                    Vector3::new(0.0, 0.0, 2.0 * wpf)
                } else {
                    Vector3::zeros()
                }
            }),
        }
    });
    Preset {
        sketch,
        config: TrajOptConfig::default(),
        params,
    }
}

/// Rear up on the hind legs: front feet lift while the base pitches up
/// about the hind contact line, then settle back down.
fn front_hop() -> Preset {
    let params = default_params();
    let wpf = weight_per_foot(&params);
    let theta_max: f64 = 0.45;
    let (t_up0, t_up1, t_dn0, t_dn1) = (1.5, 1.85, 2.05, 2.4);
    let pivot = Vector3::new(-0.19, 0.0, 0.0);
    let rest = Vector3::new(0.19, 0.0, STAND_HEIGHT);

    let theta_at = move |t: f64| -> f64 {
        if t < t_up0 {
            0.0
        } else if t < t_up1 {
            theta_max * ramp(t, t_up0, t_up1)
        } else if t < t_dn0 {
            theta_max
        } else if t < t_dn1 {
            theta_max * (1.0 - ramp(t, t_dn0, t_dn1))
        } else {
            0.0
        }
    };

    let sketch = build_sketch("front-hop", 5.0, false, &params, |t| {
        let theta = theta_at(t);
        let rot = rot_exp(&Vector3::new(0.0, -theta, 0.0), 1.0);
        let position = pivot + rot * rest;
        let front_up = theta > 1e-9;
        let target_foot_positions = std::array::from_fn(|i| {
            let front = i < 2;
            if front && front_up {
                // Follow the front shoulders at a fixed body-frame extension.
                let b = params.shoulder_offsets[i] + Vector3::new(0.0, 0.0, -0.21);
                let mut f = position + rot * b;
                f.z = f.z.max(0.005);
                f
            } else {
                foothold(&params, i)
            }
        });
        let contact_flags = [!front_up, !front_up, true, true];
        let guess_forces = std::array::from_fn(|i| {
            let front = i < 2;
            if front && front_up {
                Vector3::zeros()
            } else if front {
                // Extra push just before liftoff seeds the pitch impulse.
                let near_lift = t > t_up0 - 0.2 && t < t_up0;
                Vector3::new(0.0, 0.0, if near_lift { 1.6 * wpf } else { wpf })
            } else if front_up {
                Vector3::new(0.0, 0.0, 2.0 * wpf)
            } else {
                Vector3::new(0.0, 0.0, wpf)
            }
        });
        SketchKnot {
            target_position: position,
            target_rotation: rot,
            target_foot_positions,
            contact_flags,
            guess_forces,
        }
    });
    Preset {
        sketch,
        config: TrajOptConfig {
            symmetry: true,
            ..TrajOptConfig::default()
        },
        params,
    }
}

/// 180-degree backflip: crouch, pitch-up push (front feet release first,
/// as in a real flip takeoff), half a turn of airborne rotation, landing
/// in the inverted stance. During flight the legs counter-rotate along the
/// -x side of the shoulder plane so the hip angles never cross +-pi.
fn backflip() -> Preset {
    let params = default_params();
    let wpf = weight_per_foot(&params);
    let (t_crouch0, t_crouch1) = (1.2, 1.6);
    let t_front_lift = 1.70;
    let t_lift = 1.78;
    let t_land = 2.24;
    let crouch = 0.17;
    let push_top = 0.28;
    let land_h = 0.20;
    let theta_lift: f64 = 0.25;
    let flight = t_land - t_lift;
    // Ballistic arc from push_top to land_h over the flight time.
    let v0 = (land_h - push_top + 0.5 * 9.81 * flight * flight) / flight;
    // Final leg direction: just shy of overhead, biased to the -x side.
    let dir_land = -(PI - 0.10);

    let theta_at = move |t: f64| -> f64 {
        if t < t_crouch1 {
            0.0
        } else if t < t_lift {
            theta_lift * ramp(t, t_crouch1, t_lift)
        } else if t < t_land {
            theta_lift + (PI - theta_lift) * (t - t_lift) / flight
        } else {
            PI
        }
    };
    let base_z = move |t: f64| -> f64 {
        if t < t_crouch0 {
            STAND_HEIGHT
        } else if t < t_crouch1 {
            STAND_HEIGHT + (crouch - STAND_HEIGHT) * ramp(t, t_crouch0, t_crouch1)
        } else if t < t_lift {
            crouch + (push_top - crouch) * ramp(t, t_crouch1, t_lift)
        } else if t < t_land {
            let tau = t - t_lift;
            push_top + v0 * tau - 0.5 * 9.81 * tau * tau
        } else {
            land_h
        }
    };

    let sketch = build_sketch("backflip", 5.0, false, &params, |t| {
        let theta = theta_at(t);
        let rot = rot_exp(&Vector3::new(0.0, -theta, 0.0), 1.0);
        let position = Vector3::new(0.0, 0.0, base_z(t));
        let landed = t >= t_land;

        let release_of = |i: usize| if i < 2 { t_front_lift } else { t_lift };
        let target_foot_positions: [Vector3<f64>; 4] = std::array::from_fn(|i| {
            let released = t >= release_of(i);
            if released && !landed {
                let progress = (t - release_of(i)) / (t_land - release_of(i));
                let dir = -0.1 + (dir_land + 0.1) * smooth01(progress);
                // Tuck mid-flight, re-extend for landing.
                let ext = if progress < 0.4 {
                    0.26 + (0.15 - 0.26) * smooth01(progress / 0.4)
                } else {
                    0.15 + (land_h - 0.15) * smooth01((progress - 0.4) / 0.6)
                };
                let b = params.shoulder_offsets[i]
                    + Vector3::new(ext * dir.sin(), 0.0, -ext * dir.cos());
                let mut f = position + rot * b;
                f.z = f.z.max(0.01);
                f
            } else if landed {
                // Inverted stance: feet just behind the (flipped) shoulders.
                let b = params.shoulder_offsets[i]
                    + Vector3::new(land_h * dir_land.sin(), 0.0, -land_h * dir_land.cos());
                let mut f = position + rot * b;
                f.z = 0.0;
                f
            } else {
                foothold(&params, i)
            }
        });

        let contact_flags: [bool; 4] = std::array::from_fn(|i| t < release_of(i) || landed);
        let push_phase = (t_crouch1..t_lift).contains(&t);
        let guess_forces: [Vector3<f64>; 4] = std::array::from_fn(|i| {
            if !contact_flags[i] {
                Vector3::zeros()
            } else if push_phase {
                // Front feet push harder while down (nose-up impulse); the
                // hind pair carries everything after the front release.
                let front = i < 2;
                let fz = if front {
                    3.0 * wpf
                } else if t >= t_front_lift {
                    2.5 * wpf
                } else {
                    1.2 * wpf
                };
                Vector3::new(0.0, 0.0, fz)
            } else if landed && t < t_land + 0.2 {
                Vector3::new(0.0, 0.0, 1.6 * wpf)
            } else {
                Vector3::new(0.0, 0.0, wpf)
            }
        });

        SketchKnot {
            target_position: position,
            target_rotation: rot,
            target_foot_positions,
            contact_flags,
            guess_forces,
        }
    });
    Preset {
        sketch,
        config: TrajOptConfig {
            symmetry: true,
            ..TrajOptConfig::default()
        },
        params,
    }
}

/// Balance on the hind legs (base pitched 75 degrees nose-up) and step in
/// place with the hind feet; solved in the sagittal plane.
fn biped_step() -> Preset {
    let params = default_params();
    let mg = params.mass * 9.81;
    let pitch: f64 = 1.31;
    let base = Vector3::new(0.0, 0.0, 0.35);
    let rot = rot_exp(&Vector3::new(0.0, -pitch, 0.0), 1.0);
    let period = 1.0;
    let lift = 0.025;
    // HL lifts in [0.10, 0.35), HR in [0.60, 0.85) of each period.
    let windows = [(0.10, 0.35), (0.60, 0.85)];

    // Front feet tucked toward the (body-frame) ground direction.
    let front_b = Vector3::new(-0.13, 0.0, -0.075);

    let sketch = build_sketch("biped-step", 10.0, false, &params, |t| {
        let tau = t.rem_euclid(period);
        // Feet settle for the first and last half second.
        let settling = !(0.5..9.5).contains(&t);
        let hind_lifted = |leg: usize| -> f64 {
            if settling {
                return 0.0;
            }
            let (w0, w1) = windows[leg];
            if (w0..w1).contains(&tau) {
                lift * (PI * (tau - w0) / (w1 - w0)).sin().max(0.0)
            } else {
                0.0
            }
        };
        let hl_z = hind_lifted(0);
        let hr_z = hind_lifted(1);

        let target_foot_positions: [Vector3<f64>; 4] = std::array::from_fn(|i| match i {
            0 | 1 => {
                let b = params.shoulder_offsets[i] + front_b;
                base + rot * b
            }
            2 => Vector3::new(0.0, params.shoulder_offsets[2].y, hl_z),
            _ => Vector3::new(0.0, params.shoulder_offsets[3].y, hr_z),
        });
        let hl_down = hl_z <= 1e-12;
        let hr_down = hr_z <= 1e-12;
        let contact_flags = [false, false, hl_down, hr_down];
        let share = if hl_down && hr_down { 0.5 } else { 1.0 };
        let guess_forces = [
            Vector3::zeros(),
            Vector3::zeros(),
            if hl_down {
                Vector3::new(0.0, 0.0, share * mg)
            } else {
                Vector3::zeros()
            },
            if hr_down {
                Vector3::new(0.0, 0.0, share * mg)
            } else {
                Vector3::zeros()
            },
        ];
        SketchKnot {
            target_position: base,
            target_rotation: rot,
            target_foot_positions,
            contact_flags,
            guess_forces,
        }
    });
    Preset {
        sketch,
        config: TrajOptConfig {
            sagittal_only: true,
            ..TrajOptConfig::default()
        },
        params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in preset_names() {
            let p = preset(name).unwrap();
            p.params.validate().unwrap();
            p.config.validate().unwrap();
            p.sketch
                .validate(&p.params)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn paper_durations() {
        assert_eq!(preset("trot").unwrap().sketch.duration, 10.0);
        assert_eq!(preset("front-hop").unwrap().sketch.duration, 5.0);
        assert_eq!(preset("backflip").unwrap().sketch.duration, 5.0);
        assert_eq!(preset("biped-step").unwrap().sketch.duration, 10.0);
        assert_eq!(preset("standing").unwrap().sketch.duration, 1.0);
        assert_eq!(preset("hop").unwrap().sketch.duration, 1.0);
    }

    #[test]
    fn hop_has_flight_phase() {
        let p = preset("hop").unwrap();
        let airborne = p
            .sketch
            .knots
            .iter()
            .filter(|k| k.contact_flags.iter().all(|c| !c))
            .count();
        assert!(airborne >= 10, "{airborne} airborne knots");
    }

    #[test]
    fn backflip_targets_inside_leg_ball() {
        let p = preset("backflip").unwrap();
        for (k, knot) in p.sketch.knots.iter().enumerate() {
            for i in 0..4 {
                let b = knot.target_rotation.transpose()
                    * (knot.target_foot_positions[i] - knot.target_position)
                    - p.params.shoulder_offsets[i];
                let l1 = b.x.abs() + b.z.abs();
                assert!(
                    l1 <= p.params.leg_length + 0.02,
                    "knot {k} foot {i}: L1 extension {l1:.3}"
                );
            }
        }
    }

    #[test]
    fn biped_step_targets_inside_leg_ball() {
        let p = preset("biped-step").unwrap();
        for (k, knot) in p.sketch.knots.iter().enumerate() {
            for i in 0..4 {
                let b = knot.target_rotation.transpose()
                    * (knot.target_foot_positions[i] - knot.target_position)
                    - p.params.shoulder_offsets[i];
                let l1 = b.x.abs() + b.z.abs();
                assert!(
                    l1 <= p.params.leg_length - 0.01,
                    "knot {k} foot {i}: L1 extension {l1:.3}"
                );
            }
        }
    }
}
