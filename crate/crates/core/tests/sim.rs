use emrs_core::kinematics::{BodyMotionCommand, LocomotionMode, Point2, Pose2p5, RoverGeometry};
use emrs_core::manager::{FaultReason, ManagerCommand, ManagerState};
use emrs_core::sim::{
    gravity_body, tracking_emulate, wheel_loads, Obstacle, Scenario, SimError, Simulator, StartPose, TiltBed,
    TrackingConfig, GRAVITY_MPS2,
};
use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn enter(sim: &mut Simulator, mode: LocomotionMode) {
    sim.command(ManagerCommand::ChangeMode { mode }).unwrap();
    while *sim.manager().state() != ManagerState::Driving(mode) {
        sim.step_control_period();
        assert!(sim.time_s() < 60.0, "mode change did not finish");
    }
}

/// Streams `cmd` for `secs` like a joystick, then commands a stop and lets the wheels settle.
fn hold(sim: &mut Simulator, cmd: BodyMotionCommand<f64>, secs: f64) {
    let end = sim.time_s() + secs;
    while sim.time_s() + 1e-9 < end {
        sim.command(ManagerCommand::Speed { command: cmd }).unwrap();
        sim.advance((end - sim.time_s()).min(0.25));
    }
    let stop = BodyMotionCommand::stop(cmd.mode(), 0.0);
    let stop = match (cmd, stop) {
        (BodyMotionCommand::Crab { heading_rad, .. }, _) => BodyMotionCommand::Crab { v_mps: 0.0, heading_rad },
        (_, s) => s,
    };
    sim.command(ManagerCommand::Speed { command: stop }).unwrap();
    sim.advance(1.0);
}

fn flat() -> Scenario {
    let mut s = Scenario::default();
    s.terrain.tilt_bed = None;
    s
}

/// Statics oracle: moments about the ground point below the centre of mass,
/// assembled from 3D cross products and solved with an SVD pseudo-inverse.
fn oracle_loads(contacts: &[Point2<f64>; 4], cog: [f64; 3], mass: f64, pitch: f64, roll: f64) -> Vec<f64> {
    let r = Rotation3::from_euler_angles(roll, pitch, 0.0);
    let g = r.inverse() * Vector3::new(0.0, 0.0, -GRAVITY_MPS2);
    let origin = Vector3::new(cog[0], cog[1], 0.0);
    let weight = g * mass;
    let m_grav = (Vector3::new(cog[0], cog[1], cog[2]) - origin).cross(&weight);
    let mut a = DMatrix::zeros(3, 4);
    for (i, c) in contacts.iter().enumerate() {
        let arm = Vector3::new(c.x, c.y, 0.0) - origin;
        let m = arm.cross(&Vector3::z());
        a[(0, i)] = 1.0;
        a[(1, i)] = m.x;
        a[(2, i)] = m.y;
    }
    let b = DVector::from_vec(vec![-weight.z, -m_grav.x, -m_grav.y]);
    let pinv = a.pseudo_inverse(1e-12).unwrap();
    (pinv * b).iter().copied().collect()
}

#[test]
fn loads_match_independent_statics_oracle() {
    for payload in [0.0, 300.0] {
        let mut g = RoverGeometry::<f64>::default();
        g.payload_mass_kg = payload;
        g.payload_cog_body = [0.1, -0.05, 0.5];
        for steering in [[0.0; 4], [0.3, -0.2, 0.7, 1.2]] {
            let contacts = g.contacts(&steering);
            for pitch in [-15.0f64, -7.0, 0.0, 9.0, 15.0] {
                for roll in [-15.0f64, 0.0, 4.0, 15.0] {
                    let (p, r) = (pitch.to_radians(), roll.to_radians());
                    let got = wheel_loads(&contacts, g.cog(), g.total_mass_kg(), p, r).unwrap();
                    let want = oracle_loads(&contacts, g.cog(), g.total_mass_kg(), p, r);
                    for i in 0..4 {
                        assert!((got[i] - want[i]).abs() < 1e-6, "{payload} {pitch} {roll}: {got:?} vs {want:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn downhill_pair_carries_more_on_fifteen_degrees() {
    let g = RoverGeometry::<f64>::default();
    let n = wheel_loads(&g.contacts(&[0.0; 4]), g.cog(), g.total_mass_kg(), -15f64.to_radians(), 0.0).unwrap();
    assert!(n[2] > n[0] && n[3] > n[1]);
    assert!(n.iter().all(|v| *v > 0.0));
}

proptest! {
    #[test]
    fn load_total_equals_normal_weight(
        pitch in -15.0f64..15.0,
        roll in -15.0f64..15.0,
        payload in 0.0f64..300.0,
        steering in prop::array::uniform4(-1.5f64..1.5),
    ) {
        let mut g = RoverGeometry::<f64>::default();
        g.payload_mass_kg = payload;
        let (p, r) = (pitch.to_radians(), roll.to_radians());
        let n = wheel_loads(&g.contacts(&steering), g.cog(), g.total_mass_kg(), p, r).unwrap();
        let total: f64 = n.iter().sum();
        let expected = -g.total_mass_kg() * gravity_body(p, r)[2];
        prop_assert!((total - expected).abs() <= 1e-9 * expected);
        prop_assert!((expected - g.total_mass_kg() * GRAVITY_MPS2 * p.cos() * r.cos()).abs() < 1e-9 * expected);
    }
}

#[test]
fn crab_at_minimum_speed_covers_one_metre_in_forty_seconds() {
    let mut sim = Simulator::new(&flat(), "flat", 7).unwrap();
    enter(&mut sim, LocomotionMode::Crab);
    let start = sim.world().true_pose;
    hold(&mut sim, BodyMotionCommand::Crab { v_mps: 0.025, heading_rad: 0.0 }, 40.0);
    let end = sim.world().true_pose;
    let d = (end.x_m - start.x_m).hypot(end.y_m - start.y_m);
    assert!((d - 1.0).abs() <= 0.01, "travelled {d}");
    assert!(sim.manager().state().fault().is_none());
}

#[test]
fn idle_world_is_a_fixed_point() {
    let mut s = flat();
    s.start = StartPose { x_m: 3.0, y_m: 2.0, yaw_deg: 30.0 };
    let mut sim = Simulator::new(&s, "idle", 1).unwrap();
    let start = sim.world().true_pose;
    sim.advance(60.0);
    assert_eq!(sim.world().true_pose, start);
    let ambient = s.control.wheel_motor.ambient_c;
    for m in sim.world().wheel_motors.iter().chain(sim.world().steering_motors.iter()) {
        assert!((m.temp_c - ambient).abs() < 1e-9);
    }
}

fn scripted(seed: u64) -> Simulator {
    let mut s = Scenario::default();
    s.terrain.tilt_bed = Some(TiltBed { hinge_x_m: 6.5, angle_deg: 12.0 });
    s.start = StartPose { x_m: 7.5, y_m: 2.5, yaw_deg: 20.0 };
    let mut sim = Simulator::new(&s, "det", seed).unwrap();
    enter(&mut sim, LocomotionMode::Ackermann);
    hold(&mut sim, BodyMotionCommand::Ackermann { v_mps: 0.15, omega_radps: 0.1 }, 3.0);
    enter(&mut sim, LocomotionMode::PointTurn);
    hold(&mut sim, BodyMotionCommand::PointTurn { omega_radps: -0.3 }, 2.0);
    sim
}

#[test]
fn identical_seed_and_commands_reproduce_the_world() {
    let (a, b) = (scripted(5), scripted(5));
    assert_eq!(a.world(), b.world());
    assert_eq!(a.tracked(), b.tracked());
    assert_ne!(scripted(6).tracked(), a.tracked());
}

#[test]
fn high_friction_soil_makes_odometry_exact() {
    let mut s = flat();
    s.soil.friction_angle_deg = 45.0;
    s.soil.cohesion_kpa = 1000.0;
    let cases = [
        (LocomotionMode::Ackermann, BodyMotionCommand::Ackermann { v_mps: 0.2, omega_radps: 0.15 }),
        (LocomotionMode::PointTurn, BodyMotionCommand::PointTurn { omega_radps: 0.4 }),
        (LocomotionMode::Crab, BodyMotionCommand::Crab { v_mps: 0.2, heading_rad: 0.6 }),
        (LocomotionMode::SkidSteer, BodyMotionCommand::Skid { v_mps: 0.15, omega_radps: -0.2 }),
    ];
    for (mode, cmd) in cases {
        let mut sim = Simulator::new(&s, "noslip", 3).unwrap();
        enter(&mut sim, mode);
        let start = sim.world().true_pose;
        hold(&mut sim, cmd, 8.0);
        let w = sim.world();
        let travelled = (w.true_pose.x_m - start.x_m).hypot(w.true_pose.y_m - start.y_m).max(1.0);
        let err = (w.true_pose.x_m - w.odometry_pose.x_m).hypot(w.true_pose.y_m - w.odometry_pose.y_m);
        assert!(err <= 1e-6 * travelled, "{mode:?}: {err}");
        assert!(w.slip.iter().all(|s| *s == 0.0));
    }
}

#[test]
fn tracking_noise_has_specified_spread() {
    let cfg = TrackingConfig::default();
    let truth = Pose2p5::planar(1.0, 2.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let samples: Vec<_> = (0..n).map(|k| tracking_emulate(&truth, k as f64 / 60.0, &cfg, &mut rng).pose).collect();
    let sd = |f: &dyn Fn(&Pose2p5<f64>) -> f64| {
        let mean = samples.iter().map(f).sum::<f64>() / n as f64;
        (samples.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    for s in [sd(&|p| p.x_m), sd(&|p| p.y_m)] {
        assert!((s / 0.001 - 1.0).abs() < 0.05, "{s}");
    }
    for s in [sd(&|p| p.yaw_rad), sd(&|p| p.pitch_rad), sd(&|p| p.roll_rad)] {
        assert!((s / 1f64.to_radians() - 1.0).abs() < 0.05, "{s}");
    }
}

#[test]
fn tracking_runs_at_sixty_hertz() {
    let mut sim = Simulator::new(&flat(), "t", 1).unwrap();
    let mut updates = 0;
    let mut last = None;
    for _ in 0..10_000 {
        sim.step();
        let t = sim.tracked().map(|m| m.t_s);
        if t != last {
            updates += 1;
            last = t;
        }
    }
    assert_eq!(updates, 600);
}

#[test]
fn driving_off_the_bed_terminates() {
    let mut s = flat();
    s.start = StartPose { x_m: 9.0, y_m: 2.75, yaw_deg: 0.0 };
    let mut sim = Simulator::new(&s, "edge", 1).unwrap();
    enter(&mut sim, LocomotionMode::Ackermann);
    for _ in 0..40 {
        let _ = sim.command(ManagerCommand::Speed {
            command: BodyMotionCommand::Ackermann { v_mps: 0.2, omega_radps: 0.0 },
        });
        sim.advance(0.25);
    }
    assert!(matches!(sim.terminal(), Some(SimError::OutOfBounds { .. })));
    assert_eq!(sim.manager().state().fault(), Some(FaultReason::SimulationTerminated));
    let frozen = sim.world().clone();
    sim.advance(1.0);
    assert_eq!(*sim.world(), frozen);
}

#[test]
fn tilt_beyond_thirty_degrees_rejected() {
    let mut sim = Simulator::new(&Scenario::default(), "tilt", 1).unwrap();
    assert!(matches!(sim.set_tilt(31.0), Err(SimError::TiltOutOfRange(_))));
    sim.set_tilt(30.0).unwrap();
}

fn obstacle_run(height_ratio: f64) -> f64 {
    let mut s = flat();
    let r = s.rover.wheel_radius_m;
    s.start = StartPose { x_m: 2.0, y_m: 2.75, yaw_deg: 0.0 };
    s.terrain.obstacles = vec![Obstacle::rectangle(3.0, 0.5, 3.3, 5.0, height_ratio * r)];
    let mut sim = Simulator::new(&s, "obstacle", 1).unwrap();
    enter(&mut sim, LocomotionMode::Ackermann);
    let x0 = sim.world().true_pose.x_m;
    hold(&mut sim, BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.0 }, 25.0);
    assert!(sim.terminal().is_none());
    sim.world().true_pose.x_m - x0
}

#[test]
fn steps_up_to_wheel_radius_are_climbed() {
    for ratio in [0.0, 0.5, 1.0] {
        let d = obstacle_run(ratio);
        assert!(d > 2.3, "h/r={ratio}: {d}");
    }
    let d = obstacle_run(1.2);
    assert!(d < 0.5, "h/r=1.2 should block: {d}");
}

#[test]
fn jammed_steering_faults() {
    let mut sim = Simulator::new(&flat(), "stall", 1).unwrap();
    sim.stall_steering(2);
    enter(&mut sim, LocomotionMode::Crab);
    sim.command(ManagerCommand::ChangeMode { mode: LocomotionMode::PointTurn }).unwrap();
    sim.advance(5.0);
    assert_eq!(sim.manager().state().fault(), Some(FaultReason::SteeringTrackingError));
    assert!(sim.setpoints().is_stopped());
}

#[test]
fn silence_while_moving_trips_the_deadman() {
    let mut sim = Simulator::new(&flat(), "deadman", 1).unwrap();
    enter(&mut sim, LocomotionMode::Crab);
    sim.command(ManagerCommand::Speed { command: BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 0.0 } })
        .unwrap();
    sim.advance(0.45);
    assert!(sim.manager().state().fault().is_none());
    sim.advance(0.1);
    assert_eq!(sim.manager().state().fault(), Some(FaultReason::CommandTimeout));
    let kinds: Vec<_> = sim.events().iter().map(|e| e.kind.as_str()).collect();
    assert_eq!(kinds, ["CommandTimeout"]);
    sim.command(ManagerCommand::Reset).unwrap();
    assert_eq!(*sim.manager().state(), ManagerState::Idle);
}

#[test]
fn excavation_load_stays_inside_limits() {
    let mut s = flat();
    s.payload_kg = 300.0;
    s.blade_drag_n = 200.0;
    let mut sim = Simulator::new(&s, "dig", 1).unwrap();
    enter(&mut sim, LocomotionMode::Ackermann);
    let x0 = sim.world().true_pose.x_m;
    hold(&mut sim, BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.0 }, 10.0);
    let d = sim.world().true_pose.x_m - x0;
    assert!((d - 1.0).abs() < 0.1, "{d}");
    assert!(sim.manager().state().fault().is_none());
}
