//! Snapshot frames published by the simulator at telemetry rate.
//!
//! Values are single precision: they are display and logging data, and f32 keeps
//! the wire text short while still round-tripping exactly through nine digits.

use serde::{Deserialize, Serialize};

use crate::kinematics::{LocomotionMode, WHEEL_COUNT};
use crate::manager::FaultReason;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    Idle,
    Driving,
    Reconfiguring,
    Fault,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistFrame {
    pub vx_mps: f32,
    pub vy_mps: f32,
    pub omega_radps: f32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFrame {
    pub x_m: f32,
    pub y_m: f32,
    pub yaw_rad: f32,
    pub pitch_rad: f32,
    pub roll_rad: f32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelFrame {
    pub steering_rad: f32,
    pub steering_setpoint_rad: f32,
    pub speed_radps: f32,
    pub speed_setpoint_radps: f32,
    pub current_a: f32,
    pub temp_c: f32,
    pub steering_current_a: f32,
    pub steering_temp_c: f32,
    pub slip: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryFrame {
    pub t_ms: u64,
    pub state: StateTag,
    pub mode: Option<LocomotionMode>,
    pub fault: Option<FaultReason>,
    pub commanded: TwistFrame,
    pub actual: TwistFrame,
    pub wheels: [WheelFrame; WHEEL_COUNT],
    pub true_pose: PoseFrame,
    pub tracked_pose: Option<PoseFrame>,
    pub tilt_deg: f32,
    pub scenario: String,
    /// Id of the client whose command was applied last.
    pub last_client: Option<u64>,
    pub advisory: Option<String>,
}
