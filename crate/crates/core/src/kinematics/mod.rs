//! Four-wheel independent steering kinematics.
//!
//! Inverse kinematics turns a body-level command in one of the four locomotion
//! modes into per-wheel steering angles and wheel speeds. Forward odometry is the
//! least-squares inverse: it recovers the body twist from measured wheel states.
//!
//! Steering is on-side: the contact point of each wheel moves with the steering
//! angle (see [`contact_point`]), so every geometric quantity is evaluated at the
//! steered contact rather than at the pivot.

mod geometry;
mod inverse;
mod odometry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use geometry::{contact_point, Point2, RoverGeometry, WheelId, WHEEL_COUNT};
pub use inverse::{
    icr_residual, inverse_kinematics, home_steering, ICR_MAX_ITERATIONS, ICR_TOLERANCE_RAD,
    OMEGA_EPS_RADPS,
};
pub use odometry::{forward_odometry, integrate_pose, Odometry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("wheel {wheel:?} needs steering angle {angle_rad:.6} rad beyond limit {limit_rad:.6} rad")]
    SteeringLimitExceeded {
        wheel: WheelId,
        angle_rad: f64,
        limit_rad: f64,
    },
    #[error("steering solve for wheel {0:?} did not converge")]
    NonConvergence(WheelId),
    #[error("odometry normal matrix is singular")]
    DegenerateGeometry,
    #[error("command for {command:?} mode issued while in {mode:?} mode")]
    ModeMismatch {
        mode: LocomotionMode,
        command: LocomotionMode,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("command out of limits: {0}")]
    CommandOutOfLimits(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocomotionMode {
    Ackermann,
    PointTurn,
    Crab,
    SkidSteer,
}

impl LocomotionMode {
    pub const ALL: [LocomotionMode; 4] = [
        LocomotionMode::Ackermann,
        LocomotionMode::PointTurn,
        LocomotionMode::Crab,
        LocomotionMode::SkidSteer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocomotionMode::Ackermann => "ackermann",
            LocomotionMode::PointTurn => "point_turn",
            LocomotionMode::Crab => "crab",
            LocomotionMode::SkidSteer => "skid_steer",
        }
    }
}

/// Body-level velocity command, one variant per locomotion mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BodyMotionCommand<T> {
    Ackermann { v_mps: T, omega_radps: T },
    PointTurn { omega_radps: T },
    Crab { v_mps: T, heading_rad: T },
    Skid { v_mps: T, omega_radps: T },
}

impl<T: Scalar> BodyMotionCommand<T> {
    pub fn mode(&self) -> LocomotionMode {
        match self {
            BodyMotionCommand::Ackermann { .. } => LocomotionMode::Ackermann,
            BodyMotionCommand::PointTurn { .. } => LocomotionMode::PointTurn,
            BodyMotionCommand::Crab { .. } => LocomotionMode::Crab,
            BodyMotionCommand::Skid { .. } => LocomotionMode::SkidSteer,
        }
    }

    /// Zero-speed command for `mode`. Crab keeps the given heading.
    pub fn stop(mode: LocomotionMode, crab_heading_rad: T) -> Self {
        let z = T::zero();
        match mode {
            LocomotionMode::Ackermann => BodyMotionCommand::Ackermann { v_mps: z, omega_radps: z },
            LocomotionMode::PointTurn => BodyMotionCommand::PointTurn { omega_radps: z },
            LocomotionMode::Crab => BodyMotionCommand::Crab { v_mps: z, heading_rad: crab_heading_rad },
            LocomotionMode::SkidSteer => BodyMotionCommand::Skid { v_mps: z, omega_radps: z },
        }
    }

    /// Negates linear and angular speed; the crab heading is unchanged.
    pub fn reversed(&self) -> Self {
        match *self {
            BodyMotionCommand::Ackermann { v_mps, omega_radps } => BodyMotionCommand::Ackermann {
                v_mps: -v_mps,
                omega_radps: -omega_radps,
            },
            BodyMotionCommand::PointTurn { omega_radps } => BodyMotionCommand::PointTurn { omega_radps: -omega_radps },
            BodyMotionCommand::Crab { v_mps, heading_rad } => BodyMotionCommand::Crab { v_mps: -v_mps, heading_rad },
            BodyMotionCommand::Skid { v_mps, omega_radps } => BodyMotionCommand::Skid {
                v_mps: -v_mps,
                omega_radps: -omega_radps,
            },
        }
    }

    /// Body twist the command asks for.
    pub fn twist(&self) -> BodyTwist<T> {
        let z = T::zero();
        match *self {
            BodyMotionCommand::Ackermann { v_mps, omega_radps } => BodyTwist::new(v_mps, z, omega_radps),
            BodyMotionCommand::PointTurn { omega_radps } => BodyTwist::new(z, z, omega_radps),
            BodyMotionCommand::Crab { v_mps, heading_rad } => {
                BodyTwist::new(v_mps * heading_rad.cos(), v_mps * heading_rad.sin(), z)
            }
            BodyMotionCommand::Skid { v_mps, omega_radps } => BodyTwist::new(v_mps, z, omega_radps),
        }
    }

    pub fn is_moving(&self) -> bool {
        let t = self.twist();
        t.vx_mps != T::zero() || t.vy_mps != T::zero() || t.omega_radps != T::zero()
    }
}

/// Speed limits applied to incoming body commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct CommandLimits<T> {
    pub v_max_mps: T,
    pub omega_max_radps: T,
}

impl<T: Scalar> Default for CommandLimits<T> {
    fn default() -> Self {
        Self {
            v_max_mps: T::lit(0.2),
            omega_max_radps: T::lit(0.5),
        }
    }
}

impl<T: Scalar> CommandLimits<T> {
    pub fn check(&self, cmd: &BodyMotionCommand<T>, geometry: &RoverGeometry<T>) -> Result<(), KinematicsError> {
        let (v, w) = match *cmd {
            BodyMotionCommand::Ackermann { v_mps, omega_radps } => (v_mps, omega_radps),
            BodyMotionCommand::PointTurn { omega_radps } => (T::zero(), omega_radps),
            BodyMotionCommand::Crab { v_mps, heading_rad } => {
                if !(heading_rad.abs() <= geometry.steering_limit_rad) {
                    return Err(KinematicsError::CommandOutOfLimits(format!(
                        "crab heading {:.6} rad outside steering limit",
                        heading_rad.as_f64()
                    )));
                }
                (v_mps, T::zero())
            }
            BodyMotionCommand::Skid { v_mps, omega_radps } => (v_mps, omega_radps),
        };
        if !(v.abs() <= self.v_max_mps) {
            return Err(KinematicsError::CommandOutOfLimits(format!("|v| = {:.6} m/s", v.as_f64())));
        }
        if !(w.abs() <= self.omega_max_radps) {
            return Err(KinematicsError::CommandOutOfLimits(format!("|omega| = {:.6} rad/s", w.as_f64())));
        }
        Ok(())
    }
}

/// Per-wheel steering angles and signed wheel angular velocities.
///
/// Used both for setpoints (what the kinematics asks for) and for measured
/// wheel states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WheelArray<T> {
    pub steering_rad: [T; WHEEL_COUNT],
    pub speed_radps: [T; WHEEL_COUNT],
}

pub type WheelSetpointArray<T> = WheelArray<T>;
pub type WheelStateArray<T> = WheelArray<T>;

impl<T: Scalar> WheelArray<T> {
    pub fn new(steering_rad: [T; WHEEL_COUNT], speed_radps: [T; WHEEL_COUNT]) -> Self {
        Self { steering_rad, speed_radps }
    }

    /// Zero wheel speeds with the given steering held.
    pub fn stopped(steering_rad: [T; WHEEL_COUNT]) -> Self {
        Self {
            steering_rad,
            speed_radps: [T::zero(); WHEEL_COUNT],
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.speed_radps.iter().all(|s| *s == T::zero())
    }
}

/// Planar body velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyTwist<T> {
    pub vx_mps: T,
    pub vy_mps: T,
    pub omega_radps: T,
}

impl<T: Scalar> BodyTwist<T> {
    pub fn new(vx_mps: T, vy_mps: T, omega_radps: T) -> Self {
        Self { vx_mps, vy_mps, omega_radps }
    }

    /// Velocity of a body-fixed point.
    #[inline]
    pub fn point_velocity(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.vx_mps - self.omega_radps * p.y, self.vy_mps + self.omega_radps * p.x)
    }
}

/// Planar pose plus terrain-induced attitude. Height is derived from the terrain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2p5<T> {
    pub x_m: T,
    pub y_m: T,
    pub yaw_rad: T,
    pub pitch_rad: T,
    pub roll_rad: T,
}

impl<T: Scalar> Pose2p5<T> {
    pub fn planar(x_m: T, y_m: T, yaw_rad: T) -> Self {
        Self {
            x_m,
            y_m,
            yaw_rad: crate::scalar::normalize_angle(yaw_rad),
            pitch_rad: T::zero(),
            roll_rad: T::zero(),
        }
    }
}
