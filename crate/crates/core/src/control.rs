//! Inner actuator loops: PI wheel velocity control, PD steering position control,
//! and the first-order DC motor plant with a lumped thermal model.
//!
//! Every step function is pure: it takes a state value and returns the next one.

use serde::{Deserialize, Serialize};

use crate::scalar::{clamp_abs, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains<T> {
    pub kp: T,
    pub ki: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains<T> {
    pub kp: T,
    pub kd: T,
}

/// PI velocity loop with clamped integrator. Output is a torque command (N m).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityLoopState<T> {
    pub gains: PiGains<T>,
    pub integrator: T,
    pub last_error: T,
    pub integrator_clamp: T,
    pub output_limit: T,
}

impl<T: Scalar> VelocityLoopState<T> {
    /// The integrator clamp defaults to the value that alone saturates the output.
    pub fn new(gains: PiGains<T>, output_limit: T) -> Self {
        let integrator_clamp = if gains.ki > T::zero() {
            output_limit / gains.ki
        } else {
            T::zero()
        };
        Self {
            gains,
            integrator: T::zero(),
            last_error: T::zero(),
            integrator_clamp,
            output_limit,
        }
    }

    pub fn reset(self) -> Self {
        Self {
            integrator: T::zero(),
            last_error: T::zero(),
            ..self
        }
    }

    /// One control period. While the output saturates in the direction of the
    /// error the integrator is frozen.
    pub fn step(self, setpoint: T, measured: T, dt: T) -> (T, Self) {
        let error = setpoint - measured;
        let mut integrator = clamp_abs(self.integrator + error * dt, self.integrator_clamp);
        let mut u = self.gains.kp * error + self.gains.ki * integrator;
        if u.abs() > self.output_limit && (u > T::zero()) == (error > T::zero()) {
            integrator = self.integrator;
            u = self.gains.kp * error + self.gains.ki * integrator;
        }
        let torque = clamp_abs(u, self.output_limit);
        (
            torque,
            Self {
                integrator,
                last_error: error,
                ..self
            },
        )
    }
}

/// PD steering position loop with setpoint-rate feedforward. Output is a rate command (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionLoopState<T> {
    pub gains: PdGains<T>,
    pub output_limit: T,
    pub last_setpoint: Option<T>,
}

impl<T: Scalar> PositionLoopState<T> {
    pub fn new(gains: PdGains<T>, output_limit: T) -> Self {
        Self {
            gains,
            output_limit,
            last_setpoint: None,
        }
    }

    pub fn step(self, setpoint: T, measured: T, measured_rate: T, dt: T) -> (T, Self) {
        let ff = match self.last_setpoint {
            Some(prev) if dt > T::zero() => (setpoint - prev) / dt,
            _ => T::zero(),
        };
        let error = setpoint - measured;
        let rate = ff + self.gains.kp * error + self.gains.kd * (ff - measured_rate);
        (
            clamp_abs(rate, self.output_limit),
            Self {
                last_setpoint: Some(setpoint),
                ..self
            },
        )
    }
}

/// Output-referred DC motor and gearbox parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorParams<T> {
    pub inertia_kg_m2: T,
    pub damping_nms_per_rad: T,
    pub torque_constant_nm_per_a: T,
    pub resistance_ohm: T,
    pub thermal_capacity_j_per_c: T,
    pub dissipation_w_per_c: T,
    pub ambient_c: T,
    pub torque_limit_nm: T,
}

impl<T: Scalar> MotorParams<T> {
    /// Drive motor; inertia includes a quarter of the unladen rover reflected at the wheel.
    pub fn default_wheel() -> Self {
        Self {
            inertia_kg_m2: T::lit(1.5),
            damping_nms_per_rad: T::lit(0.5),
            torque_constant_nm_per_a: T::lit(5.0),
            resistance_ohm: T::lit(0.4),
            thermal_capacity_j_per_c: T::lit(400.0),
            dissipation_w_per_c: T::lit(2.0),
            ambient_c: T::lit(20.0),
            torque_limit_nm: T::lit(150.0),
        }
    }

    pub fn default_steering() -> Self {
        Self {
            inertia_kg_m2: T::lit(0.1),
            damping_nms_per_rad: T::lit(0.3),
            torque_constant_nm_per_a: T::lit(2.0),
            resistance_ohm: T::lit(1.0),
            thermal_capacity_j_per_c: T::lit(150.0),
            dissipation_w_per_c: T::lit(1.0),
            ambient_c: T::lit(20.0),
            torque_limit_nm: T::lit(20.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorState<T> {
    pub speed_radps: T,
    pub current_a: T,
    pub temp_c: T,
}

impl<T: Scalar> MotorState<T> {
    pub fn at_rest(params: &MotorParams<T>) -> Self {
        Self {
            speed_radps: T::zero(),
            current_a: T::zero(),
            temp_c: params.ambient_c,
        }
    }
}

/// Forward-Euler plant update:
/// `J dw/dt = tau - tau_load - b w`, `I = tau / kt`, `C dT/dt = I^2 R - k (T - ambient)`.
pub fn motor_step<T: Scalar>(
    state: &MotorState<T>,
    params: &MotorParams<T>,
    torque_cmd: T,
    load_torque: T,
    dt: T,
) -> MotorState<T> {
    let tau = clamp_abs(torque_cmd, params.torque_limit_nm);
    let accel = (tau - load_torque - params.damping_nms_per_rad * state.speed_radps) / params.inertia_kg_m2;
    let current = tau / params.torque_constant_nm_per_a;
    let heat = current * current * params.resistance_ohm - params.dissipation_w_per_c * (state.temp_c - params.ambient_c);
    MotorState {
        speed_radps: state.speed_radps + accel * dt,
        current_a: current,
        temp_c: (state.temp_c + heat / params.thermal_capacity_j_per_c * dt).max(params.ambient_c),
    }
}

/// Loop gains and plant parameters for all eight actuators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct ControlConfig<T> {
    pub wheel_velocity: PiGains<T>,
    pub steering_position: PdGains<T>,
    pub steering_velocity: PiGains<T>,
    /// Steering actuator rate clamp, rad/s.
    pub steering_rate_limit_radps: T,
    pub wheel_motor: MotorParams<T>,
    pub steering_motor: MotorParams<T>,
}

impl<T: Scalar> Default for ControlConfig<T> {
    /// Gains from a single tuning pass against the default plants (100 Hz loops, 1 kHz plant).
    fn default() -> Self {
        Self {
            wheel_velocity: PiGains {
                kp: T::lit(40.0),
                ki: T::lit(100.0),
            },
            steering_position: PdGains {
                kp: T::lit(20.0),
                kd: T::lit(0.05),
            },
            steering_velocity: PiGains {
                kp: T::lit(6.0),
                ki: T::lit(200.0),
            },
            steering_rate_limit_radps: T::lit(1.0),
            wheel_motor: MotorParams::default_wheel(),
            steering_motor: MotorParams::default_steering(),
        }
    }
}

/// Drive wheel: velocity loop plus motor, with the torque command held between control periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WheelActuator<T> {
    pub controller: VelocityLoopState<T>,
    pub motor: MotorState<T>,
    pub params: MotorParams<T>,
    pub torque_cmd: T,
}

impl<T: Scalar> WheelActuator<T> {
    pub fn new(gains: PiGains<T>, params: MotorParams<T>) -> Self {
        Self {
            controller: VelocityLoopState::new(gains, params.torque_limit_nm),
            motor: MotorState::at_rest(&params),
            params,
            torque_cmd: T::zero(),
        }
    }

    pub fn control(&mut self, setpoint_radps: T, dt: T) {
        let (u, next) = self.controller.step(setpoint_radps, self.motor.speed_radps, dt);
        self.controller = next;
        self.torque_cmd = u;
    }

    pub fn physics(&mut self, load_torque: T, dt: T) {
        self.motor = motor_step(&self.motor, &self.params, self.torque_cmd, load_torque, dt);
    }
}

/// Steering actuator: position loop cascaded onto a rate loop, plus motor and angle state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringActuator<T> {
    pub position: PositionLoopState<T>,
    pub velocity: VelocityLoopState<T>,
    pub motor: MotorState<T>,
    pub params: MotorParams<T>,
    pub angle_rad: T,
    pub torque_cmd: T,
    /// Set to hold the actuator still regardless of command, e.g. for a jammed joint.
    pub stalled: bool,
}

impl<T: Scalar> SteeringActuator<T> {
    pub fn new(config: &ControlConfig<T>, angle_rad: T) -> Self {
        let params = config.steering_motor;
        Self {
            position: PositionLoopState::new(config.steering_position, config.steering_rate_limit_radps),
            velocity: VelocityLoopState::new(config.steering_velocity, params.torque_limit_nm),
            motor: MotorState::at_rest(&params),
            params,
            angle_rad,
            torque_cmd: T::zero(),
            stalled: false,
        }
    }

    pub fn control(&mut self, setpoint_rad: T, dt: T) {
        let (rate, position) = self.position.step(setpoint_rad, self.angle_rad, self.motor.speed_radps, dt);
        let (u, velocity) = self.velocity.step(rate, self.motor.speed_radps, dt);
        self.position = position;
        self.velocity = velocity;
        self.torque_cmd = u;
    }

    pub fn physics(&mut self, load_torque: T, dt: T) {
        if self.stalled {
            self.motor = motor_step(&self.motor, &self.params, self.torque_cmd, self.torque_cmd, dt);
            self.motor.speed_radps = T::zero();
            return;
        }
        self.motor = motor_step(&self.motor, &self.params, self.torque_cmd, load_torque, dt);
        self.angle_rad += self.motor.speed_radps * dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_outputs_integral_term_only() {
        let s = VelocityLoopState::new(PiGains { kp: 40.0f64, ki: 100.0 }, 150.0);
        let (u, _) = s.step(3.0, 3.0, 0.01);
        assert_eq!(u, 0.0);
        let s = VelocityLoopState { integrator: 0.2, ..s };
        let (u, _) = s.step(3.0, 3.0, 0.01);
        assert!((u - 20.0).abs() < 1e-12);
    }

    #[test]
    fn integrator_respects_clamp_under_saturation() {
        let mut s = VelocityLoopState::new(PiGains { kp: 1.0f64, ki: 10.0 }, 5.0);
        s.integrator_clamp = 0.3;
        for _ in 0..10_000 {
            let (u, next) = s.step(1000.0, 0.0, 0.01);
            assert!(u.abs() <= 5.0);
            assert!(next.integrator.abs() <= 0.3);
            s = next;
        }
    }

    #[test]
    fn position_loop_examples() {
        let s = PositionLoopState::new(PdGains { kp: 4.0, kd: 0.0 }, std::f64::consts::FRAC_PI_6);
        assert_eq!(s.step(0.3, 0.3, 0.0, 0.01).0, 0.0);
        assert_eq!(s.step(0.5, 0.0, 0.0, 0.01).0, std::f64::consts::FRAC_PI_6);
        assert_eq!(s.step(-0.5, 0.0, 0.0, 0.01).0, -std::f64::consts::FRAC_PI_6);
    }

    #[test]
    fn motor_at_rest_only_cools() {
        let p = MotorParams::<f64>::default_wheel();
        let s = MotorState { speed_radps: 0.0, current_a: 0.0, temp_c: 50.0 };
        let n = motor_step(&s, &p, 0.0, 0.0, 0.001);
        assert_eq!(n.speed_radps, 0.0);
        assert_eq!(n.current_a, 0.0);
        assert!(n.temp_c < 50.0 && n.temp_c > p.ambient_c);
    }

    #[test]
    fn constant_torque_matches_first_order_solution() {
        // Analytic oracle: w(t) = tau/b * (1 - exp(-b t / J)).
        let p = MotorParams::<f64>::default_wheel();
        let tau = 2.0;
        let dt = 1e-3;
        let mut s = MotorState::at_rest(&p);
        for k in 1..=30_000 {
            s = motor_step(&s, &p, tau, 0.0, dt);
            let t = k as f64 * dt;
            if k % 1000 == 0 {
                let exact = tau / p.damping_nms_per_rad * (1.0 - (-p.damping_nms_per_rad * t / p.inertia_kg_m2).exp());
                assert!((s.speed_radps - exact).abs() <= 0.01 * exact, "t={t}: {} vs {exact}", s.speed_radps);
            }
        }
        assert!((s.speed_radps - tau / p.damping_nms_per_rad).abs() < 0.01 * tau / p.damping_nms_per_rad);
    }

    #[test]
    fn stall_heats_monotonically_to_balance() {
        let p = MotorParams::<f64>::default_wheel();
        let mut s = MotorState::at_rest(&p);
        let mut prev = s.temp_c;
        // Stalled: load torque equals the command.
        for _ in 0..2_000_000 {
            s = motor_step(&s, &p, p.torque_limit_nm, p.torque_limit_nm, 1e-3);
            assert!(s.temp_c >= prev);
            prev = s.temp_c;
        }
        let i = p.torque_limit_nm / p.torque_constant_nm_per_a;
        let balance = p.ambient_c + i * i * p.resistance_ohm / p.dissipation_w_per_c;
        assert!((s.temp_c - balance).abs() < 1.0, "{} vs {balance}", s.temp_c);
        assert_eq!(s.speed_radps, 0.0);
    }

    #[test]
    fn free_spin_decays_monotonically() {
        let p = MotorParams::<f64>::default_wheel();
        let mut s = MotorState { speed_radps: 12.0, ..MotorState::at_rest(&p) };
        for _ in 0..10_000 {
            let n = motor_step(&s, &p, 0.0, 0.0, 1e-3);
            assert!(n.speed_radps.abs() * n.speed_radps.abs() <= s.speed_radps * s.speed_radps);
            s = n;
        }
    }
}
