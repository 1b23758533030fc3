//! Scratch driver: solve a preset and print feasibility + timing.
//! Usage: cargo run --release -p motionforge --example solve_probe -- [preset ...]

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<&str> = if args.is_empty() {
        vec!["standing", "hop"]
    } else {
        args.iter().map(|s| s.as_str()).collect()
    };
    for name in names {
        let preset = motionforge::trajopt::preset(name).expect("preset name");
        let start = std::time::Instant::now();
        match motionforge::trajopt::solve_motion(&preset.sketch, &preset.params, &preset.config) {
            Ok(traj) => {
                let r = &traj.feasibility;
                println!(
                    "{name}: OK in {:.1}s  dyn {:.2e} comp {:.2e} fric {:.2e} kin {:.2e} stages {:?}",
                    start.elapsed().as_secs_f64(),
                    r.dynamics,
                    r.complementarity,
                    r.friction,
                    r.kinematic,
                    r.stages
                );
            }
            Err(e) => {
                let r = &e.trajectory.feasibility;
                println!(
                    "{name}: FAILED in {:.1}s  ({})  dyn {:.2e} comp {:.2e} fric {:.2e} kin {:.2e}",
                    start.elapsed().as_secs_f64(),
                    e.summary,
                    r.dynamics,
                    r.complementarity,
                    r.friction,
                    r.kinematic,
                );
                // Split the kinematic family: L1-ball vs shoulder-plane.
                let t = &e.trajectory;
                let (mut l1max, mut bymax) = (0.0f64, 0.0f64);
                let (mut l1arg, mut byarg) = ((0, 0), (0, 0));
                for (k, knot) in t.knots.iter().enumerate() {
                    for i in 0..4 {
                        let b = knot.state.rotation.transpose()
                            * (knot.contacts.foot_positions[i] - knot.state.position)
                            - t.params.shoulder_offsets[i];
                        let v = (b.x.abs() + b.z.abs() - t.params.leg_length).max(0.0);
                        if v > l1max {
                            l1max = v;
                            l1arg = (k, i);
                        }
                        if b.y.abs() > bymax {
                            bymax = b.y.abs();
                            byarg = (k, i);
                        }
                    }
                }
                println!("  L1 ball max {l1max:.2e} at {l1arg:?}, |b_y| max {bymax:.2e} at {byarg:?}");
            }
        }
    }
}
