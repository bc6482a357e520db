use serde::{Deserialize, Serialize};

use super::FaultReason;
use crate::kinematics::WHEEL_COUNT;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct SafetyLimits<T> {
    pub max_motor_current_a: T,
    pub max_motor_temp_c: T,
    pub max_tracking_err_radps: T,
    pub max_steering_err_rad: T,
    /// How long a tracking error must persist before it faults.
    pub sustain_s: T,
    /// Maximum silence while a moving command is active.
    pub command_timeout_s: T,
}

impl<T: Scalar> Default for SafetyLimits<T> {
    fn default() -> Self {
        Self {
            max_motor_current_a: T::lit(35.0),
            max_motor_temp_c: T::lit(80.0),
            max_tracking_err_radps: T::lit(2.0),
            max_steering_err_rad: T::lit(0.2),
            sustain_s: T::lit(0.5),
            command_timeout_s: T::lit(0.5),
        }
    }
}

impl<T: Scalar> SafetyLimits<T> {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("max_motor_current_a", self.max_motor_current_a),
            ("max_motor_temp_c", self.max_motor_temp_c),
            ("max_tracking_err_radps", self.max_tracking_err_radps),
            ("max_steering_err_rad", self.max_steering_err_rad),
            ("sustain_s", self.sustain_s),
            ("command_timeout_s", self.command_timeout_s),
        ];
        match fields.iter().find(|(_, v)| !(*v > T::zero() && v.is_finite())) {
            Some((name, _)) => Err(format!("{name} must be positive")),
            None => Ok(()),
        }
    }
}

/// One actuator as seen by supervision.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActuatorSample<T> {
    pub setpoint: T,
    pub measured: T,
    pub current_a: T,
    pub temp_c: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HealthSample<T> {
    pub now_s: T,
    pub wheels: [ActuatorSample<T>; WHEEL_COUNT],
    pub steering: [ActuatorSample<T>; WHEEL_COUNT],
    /// See [`LocomotionManager::last_motion_command_s`](super::LocomotionManager::last_motion_command_s).
    pub last_motion_command_s: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Health {
    Ok,
    Fault(FaultReason),
}

/// Latching health monitor. Tracking errors fault only once they have persisted.
#[derive(Clone, Debug, PartialEq)]
pub struct Supervisor<T> {
    pub limits: SafetyLimits<T>,
    wheel_error_since: [Option<T>; WHEEL_COUNT],
    steering_error_since: [Option<T>; WHEEL_COUNT],
}

impl<T: Scalar> Supervisor<T> {
    pub fn new(limits: SafetyLimits<T>) -> Self {
        Self {
            limits,
            wheel_error_since: [None; WHEEL_COUNT],
            steering_error_since: [None; WHEEL_COUNT],
        }
    }

    pub fn reset(&mut self) {
        self.wheel_error_since = [None; WHEEL_COUNT];
        self.steering_error_since = [None; WHEEL_COUNT];
    }

    pub fn check(&mut self, s: &HealthSample<T>) -> Health {
        let l = self.limits;
        let all = s.wheels.iter().chain(s.steering.iter());
        if all.clone().any(|a| a.current_a.abs() > l.max_motor_current_a) {
            return Health::Fault(FaultReason::OverCurrent);
        }
        if all.clone().any(|a| a.temp_c > l.max_motor_temp_c) {
            return Health::Fault(FaultReason::OverTemperature);
        }
        let wheel = persist(&mut self.wheel_error_since, &s.wheels, l.max_tracking_err_radps, s.now_s);
        let steer = persist(&mut self.steering_error_since, &s.steering, l.max_steering_err_rad, s.now_s);
        if wheel >= l.sustain_s {
            return Health::Fault(FaultReason::WheelTrackingError);
        }
        if steer >= l.sustain_s {
            return Health::Fault(FaultReason::SteeringTrackingError);
        }
        if let Some(last) = s.last_motion_command_s {
            if s.now_s - last > l.command_timeout_s {
                return Health::Fault(FaultReason::CommandTimeout);
            }
        }
        Health::Ok
    }
}

/// Updates onset times and returns the longest current violation.
fn persist<T: Scalar>(
    since: &mut [Option<T>; WHEEL_COUNT],
    samples: &[ActuatorSample<T>; WHEEL_COUNT],
    threshold: T,
    now: T,
) -> T {
    let mut longest = T::zero();
    for (slot, a) in since.iter_mut().zip(samples) {
        if (a.setpoint - a.measured).abs() > threshold {
            let start = *slot.get_or_insert(now);
            longest = longest.max(now - start);
        } else {
            *slot = None;
        }
    }
    longest
}
