use emrs_core::control::{
    motor_step, ControlConfig, MotorParams, MotorState, PdGains, PiGains, PositionLoopState, SteeringActuator,
    VelocityLoopState, WheelActuator,
};
use emrs_core::manager::{plan_steering_transition, TrajectoryProfile};
use proptest::prelude::*;

const CONTROL_DT: f64 = 0.01;

/// Closed-loop wheel step response sampled at every plant step.
fn wheel_step(target: f64, duration: f64, plant_dt: f64) -> Vec<(f64, f64)> {
    let cfg = ControlConfig::<f64>::default();
    let mut act = WheelActuator::new(cfg.wheel_velocity, cfg.wheel_motor);
    let per_control = (CONTROL_DT / plant_dt).round() as usize;
    let steps = (duration / plant_dt).round() as usize;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        if k % per_control == 0 {
            act.control(target, CONTROL_DT);
        }
        act.physics(0.0, plant_dt);
        out.push(((k + 1) as f64 * plant_dt, act.motor.speed_radps));
    }
    out
}

#[test]
fn wheel_step_settles_without_excess_overshoot() {
    let trace = wheel_step(10.0, 3.0, 1e-3);
    let peak = trace.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    assert!(peak <= 11.0, "overshoot {:.2}%", (peak - 10.0) * 10.0);
    let settle = trace
        .iter()
        .rev()
        .find(|(_, w)| (w - 10.0).abs() > 0.2)
        .map_or(0.0, |p| p.0);
    assert!(settle <= 0.5, "settled at {settle}");
}

#[test]
fn halving_plant_step_changes_trajectory_little() {
    let coarse = wheel_step(10.0, 10.0, 1e-3);
    let fine = wheel_step(10.0, 10.0, 5e-4);
    let sq: f64 = coarse
        .iter()
        .enumerate()
        .map(|(i, (_, w))| (w - fine[2 * i + 1].1).powi(2))
        .sum();
    let rms = (sq / coarse.len() as f64).sqrt();
    assert!(rms < 0.01 * 10.0, "rms {rms}");
}

#[test]
fn steering_tracks_trapezoid() {
    let cfg = ControlConfig::<f64>::default();
    let traj = plan_steering_transition([0.0; 4], [std::f64::consts::FRAC_PI_2; 4], TrajectoryProfile::default());
    let mut act = SteeringActuator::new(&cfg, 0.0);
    let mut worst = 0.0f64;
    let mut t = 0.0;
    while t < traj.duration_s + 1.0 {
        let sp = traj.sample(t)[0];
        worst = worst.max((sp - act.angle_rad).abs());
        act.control(sp, CONTROL_DT);
        for _ in 0..10 {
            act.physics(0.0, 1e-3);
        }
        t += CONTROL_DT;
    }
    assert!(worst < 0.02, "max tracking error {worst}");
    assert!((act.angle_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
}

#[test]
fn stalled_steering_does_not_move() {
    let cfg = ControlConfig::<f64>::default();
    let mut act = SteeringActuator::new(&cfg, 0.2);
    act.stalled = true;
    for _ in 0..100 {
        act.control(1.0, CONTROL_DT);
        for _ in 0..10 {
            act.physics(0.0, 1e-3);
        }
    }
    assert_eq!(act.angle_rad, 0.2);
    assert!(act.motor.current_a.abs() > 0.0);
}

proptest! {
    #[test]
    fn velocity_loop_output_and_integrator_bounded(
        kp in 0.0f64..100.0,
        ki in 0.1f64..300.0,
        limit in 1.0f64..200.0,
        inputs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..200),
    ) {
        let mut s = VelocityLoopState::new(PiGains { kp, ki }, limit);
        for (sp, meas) in inputs {
            let (u, next) = s.step(sp, meas, CONTROL_DT);
            prop_assert!(u.abs() <= limit);
            prop_assert!(next.integrator.abs() <= s.integrator_clamp);
            s = next;
        }
    }

    #[test]
    fn position_loop_output_bounded(
        kp in 0.0f64..50.0,
        kd in 0.0f64..1.0,
        limit in 0.1f64..2.0,
        inputs in prop::collection::vec((-1.6f64..1.6, -1.6f64..1.6, -3.0f64..3.0), 1..200),
    ) {
        let mut s = PositionLoopState::new(PdGains { kp, kd }, limit);
        for (sp, meas, rate) in inputs {
            let (u, next) = s.step(sp, meas, rate, CONTROL_DT);
            prop_assert!(u.abs() <= limit);
            s = next;
        }
    }

    #[test]
    fn motor_temperature_never_below_ambient(
        torques in prop::collection::vec((-200.0f64..200.0, -50.0f64..50.0), 1..500),
    ) {
        let p = MotorParams::<f64>::default_wheel();
        let mut s = MotorState::at_rest(&p);
        for (tau, load) in torques {
            s = motor_step(&s, &p, tau, load, 1e-3);
            prop_assert!(s.temp_c >= p.ambient_c);
            prop_assert!(s.current_a.abs() <= p.torque_limit_nm / p.torque_constant_nm_per_a + 1e-12);
        }
    }
}
