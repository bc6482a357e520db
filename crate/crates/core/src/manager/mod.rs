//! Locomotion manager: the supervisory state machine between operator commands
//! and the actuator loops.
//!
//! Speed commands pass through inverse kinematics while driving. Mode changes stop
//! the wheels, re-aim the steering along a synchronized trapezoidal trajectory to
//! the new mode's home configuration, and only then resume driving.

mod supervisor;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    home_steering, inverse_kinematics, BodyMotionCommand, CommandLimits, KinematicsError, LocomotionMode,
    RoverGeometry, WheelArray, WHEEL_COUNT,
};
use crate::scalar::{clamp_abs, Scalar};

pub use supervisor::{ActuatorSample, Health, HealthSample, SafetyLimits, Supervisor};
pub use trajectory::{plan_steering_transition, SteeringTrajectory, TrajectoryProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultReason {
    EStop,
    OverCurrent,
    OverTemperature,
    WheelTrackingError,
    SteeringTrackingError,
    CommandTimeout,
    SimulationTerminated,
}

impl FaultReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultReason::EStop => "EStop",
            FaultReason::OverCurrent => "OverCurrent",
            FaultReason::OverTemperature => "OverTemperature",
            FaultReason::WheelTrackingError => "WheelTrackingError",
            FaultReason::SteeringTrackingError => "SteeringTrackingError",
            FaultReason::CommandTimeout => "CommandTimeout",
            FaultReason::SimulationTerminated => "SimulationTerminated",
        }
    }
}

impl std::fmt::Display for FaultReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ManagerState<T> {
    Idle,
    Driving(LocomotionMode),
    Reconfiguring {
        from: Option<LocomotionMode>,
        to: LocomotionMode,
        trajectory: SteeringTrajectory<T>,
        started_at_s: T,
    },
    Fault(FaultReason),
}

impl<T> ManagerState<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ManagerState::Idle => "idle",
            ManagerState::Driving(_) => "driving",
            ManagerState::Reconfiguring { .. } => "reconfiguring",
            ManagerState::Fault(_) => "fault",
        }
    }

    /// Mode being driven, or being reconfigured into.
    pub fn mode(&self) -> Option<LocomotionMode> {
        match self {
            ManagerState::Driving(m) => Some(*m),
            ManagerState::Reconfiguring { to, .. } => Some(*to),
            _ => None,
        }
    }

    pub fn fault(&self) -> Option<FaultReason> {
        match self {
            ManagerState::Fault(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ManagerCommand<T> {
    Speed { command: BodyMotionCommand<T> },
    ChangeMode { mode: LocomotionMode },
    EStop,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManagerError {
    #[error("{command} not accepted in state {state}")]
    InvalidCommandInState { command: &'static str, state: &'static str },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct ManagerConfig<T> {
    pub limits: CommandLimits<T>,
    pub steering_profile: TrajectoryProfile<T>,
}

impl<T: Scalar> Default for ManagerConfig<T> {
    fn default() -> Self {
        Self {
            limits: CommandLimits::default(),
            steering_profile: TrajectoryProfile::default(),
        }
    }
}

/// The manager. Advanced by a single owner: commands via [`handle_command`], time via [`tick`].
///
/// [`handle_command`]: LocomotionManager::handle_command
/// [`tick`]: LocomotionManager::tick
#[derive(Clone, Debug)]
pub struct LocomotionManager<T> {
    geometry: RoverGeometry<T>,
    config: ManagerConfig<T>,
    state: ManagerState<T>,
    /// Last emitted steering setpoints.
    steering: [T; WHEEL_COUNT],
    /// Kinematic target while driving.
    target: WheelArray<T>,
    active: Option<BodyMotionCommand<T>>,
    latched: Option<BodyMotionCommand<T>>,
    crab_heading: T,
    last_tick_s: Option<T>,
    last_command_s: Option<T>,
}

impl<T: Scalar> LocomotionManager<T> {
    pub fn new(geometry: RoverGeometry<T>, config: ManagerConfig<T>) -> Self {
        Self {
            geometry,
            config,
            state: ManagerState::Idle,
            steering: [T::zero(); WHEEL_COUNT],
            target: WheelArray::default(),
            active: None,
            latched: None,
            crab_heading: T::zero(),
            last_tick_s: None,
            last_command_s: None,
        }
    }

    pub fn state(&self) -> &ManagerState<T> {
        &self.state
    }

    pub fn geometry(&self) -> &RoverGeometry<T> {
        &self.geometry
    }

    pub fn config(&self) -> &ManagerConfig<T> {
        &self.config
    }

    /// Active speed command while driving.
    pub fn active_command(&self) -> Option<&BodyMotionCommand<T>> {
        self.active.as_ref()
    }

    pub fn last_command_s(&self) -> Option<T> {
        self.last_command_s
    }

    /// Time of the last command, if the rover is currently commanded to move.
    pub fn last_motion_command_s(&self) -> Option<T> {
        match (&self.state, &self.active) {
            (ManagerState::Driving(_), Some(cmd)) if cmd.is_moving() => self.last_command_s,
            _ => None,
        }
    }

    pub fn steering_setpoints(&self) -> [T; WHEEL_COUNT] {
        self.steering
    }

    fn stopped(&self) -> WheelArray<T> {
        WheelArray::stopped(self.steering)
    }

    fn reject(&mut self, command: &'static str) -> ManagerError {
        ManagerError::InvalidCommandInState {
            command,
            state: self.state.name(),
        }
    }

    /// Applies one operator command received at `now`.
    ///
    /// Returns the setpoints the command asks for. On error the state is unchanged
    /// and any active speed command is dropped, so the rover comes to rest.
    pub fn handle_command(&mut self, cmd: ManagerCommand<T>, now: T) -> Result<WheelArray<T>, ManagerError> {
        self.last_command_s = Some(now);
        let result = self.dispatch(cmd, now);
        if result.is_err() {
            self.active = None;
            if let ManagerState::Driving(_) = self.state {
                self.target = WheelArray::stopped(self.target.steering_rad);
            }
        }
        result
    }

    fn dispatch(&mut self, cmd: ManagerCommand<T>, now: T) -> Result<WheelArray<T>, ManagerError> {
        match cmd {
            ManagerCommand::EStop => {
                self.enter_fault(FaultReason::EStop);
                Ok(self.stopped())
            }
            ManagerCommand::Reset => match self.state {
                ManagerState::Fault(_) => {
                    self.state = ManagerState::Idle;
                    Ok(self.stopped())
                }
                _ => Err(self.reject("reset")),
            },
            ManagerCommand::ChangeMode { mode } => self.change_mode(mode, now),
            ManagerCommand::Speed { command } => self.speed(command),
        }
    }

    fn change_mode(&mut self, mode: LocomotionMode, now: T) -> Result<WheelArray<T>, ManagerError> {
        let from = match self.state {
            ManagerState::Fault(_) => return Err(self.reject("change_mode")),
            ManagerState::Driving(m) if m == mode => return Ok(self.current_target()),
            ManagerState::Reconfiguring { to, .. } if to == mode => return Ok(self.stopped()),
            ManagerState::Driving(m) => Some(m),
            ManagerState::Reconfiguring { from, .. } => from,
            ManagerState::Idle => None,
        };
        let home = home_steering(mode, self.crab_heading, &self.geometry)?;
        self.state = ManagerState::Reconfiguring {
            from,
            to: mode,
            trajectory: plan_steering_transition(self.steering, home, self.config.steering_profile),
            started_at_s: now,
        };
        self.active = None;
        self.latched = None;
        Ok(self.stopped())
    }

    fn speed(&mut self, command: BodyMotionCommand<T>) -> Result<WheelArray<T>, ManagerError> {
        let mode = match self.state {
            ManagerState::Driving(m) => m,
            ManagerState::Reconfiguring { to, .. } => {
                self.config.limits.check(&command, &self.geometry)?;
                if command.mode() != to {
                    return Err(KinematicsError::ModeMismatch { mode: to, command: command.mode() }.into());
                }
                self.latched = Some(command);
                return Ok(self.stopped());
            }
            _ => return Err(self.reject("speed")),
        };
        self.config.limits.check(&command, &self.geometry)?;
        let setpoints = inverse_kinematics(mode, &command, &self.geometry)?;
        self.apply(command, setpoints);
        Ok(setpoints)
    }

    fn apply(&mut self, command: BodyMotionCommand<T>, setpoints: WheelArray<T>) {
        if let BodyMotionCommand::Crab { heading_rad, .. } = command {
            self.crab_heading = heading_rad;
        }
        self.target = setpoints;
        self.active = Some(command);
    }

    fn current_target(&self) -> WheelArray<T> {
        match self.active {
            Some(_) => self.target,
            None => WheelArray::stopped(self.target.steering_rad),
        }
    }

    /// Forces the manager into `Fault`. Used by health supervision.
    pub fn enter_fault(&mut self, reason: FaultReason) {
        self.state = ManagerState::Fault(reason);
        self.active = None;
        self.latched = None;
    }

    /// Advances time and returns the setpoints to send to the actuator loops.
    ///
    /// Steering setpoints move at most `max_rate * dt` per call.
    pub fn tick(&mut self, now: T) -> WheelArray<T> {
        let dt = self.last_tick_s.map_or(T::zero(), |t| (now - t).max(T::zero()));
        self.last_tick_s = Some(now);

        if let ManagerState::Reconfiguring { to, trajectory, started_at_s, .. } = self.state {
            let elapsed = now - started_at_s;
            if elapsed < trajectory.duration_s {
                self.steering = trajectory.sample(elapsed);
                return self.stopped();
            }
            self.steering = trajectory.end;
            self.state = ManagerState::Driving(to);
            self.target = WheelArray::stopped(trajectory.end);
            if let Some(cmd) = self.latched.take() {
                match inverse_kinematics(to, &cmd, &self.geometry) {
                    Ok(sp) => self.apply(cmd, sp),
                    Err(_) => self.active = None,
                }
            }
            // Wheels resume on the next tick, once steering has settled on the home configuration.
            return self.stopped();
        }

        match self.state {
            ManagerState::Driving(_) => {
                let step = self.config.steering_profile.max_rate_radps * dt;
                for i in 0..WHEEL_COUNT {
                    let delta = clamp_abs(self.target.steering_rad[i] - self.steering[i], step);
                    self.steering[i] += delta;
                }
                let speeds = match self.active {
                    Some(_) => self.target.speed_radps,
                    None => [T::zero(); WHEEL_COUNT],
                };
                WheelArray::new(self.steering, speeds)
            }
            _ => self.stopped(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manager() -> LocomotionManager<f64> {
        LocomotionManager::new(RoverGeometry::default(), ManagerConfig::default())
    }

    fn drive_into(m: &mut LocomotionManager<f64>, mode: LocomotionMode, t: &mut f64) {
        m.handle_command(ManagerCommand::ChangeMode { mode }, *t).unwrap();
        for _ in 0..1000 {
            *t += 0.01;
            m.tick(*t);
            if *m.state() == ManagerState::Driving(mode) {
                return;
            }
        }
        panic!("never reached {mode:?}");
    }

    #[test]
    fn crab_speed_passes_through() {
        let mut m = manager();
        let mut t = 0.0;
        drive_into(&mut m, LocomotionMode::Crab, &mut t);
        let sp = m
            .handle_command(
                ManagerCommand::Speed { command: BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 0.0 } },
                t,
            )
            .unwrap();
        assert_eq!(*m.state(), ManagerState::Driving(LocomotionMode::Crab));
        assert_eq!(sp.steering_rad, [0.0; 4]);
        assert!(sp.speed_radps.iter().all(|s| (s - 0.666_666_67).abs() < 1e-6));
    }

    #[test]
    fn mode_change_stops_wheels() {
        let mut m = manager();
        let mut t = 0.0;
        drive_into(&mut m, LocomotionMode::Ackermann, &mut t);
        m.handle_command(
            ManagerCommand::Speed { command: BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.0 } },
            t,
        )
        .unwrap();
        assert!(!m.tick(t + 0.01).is_stopped());
        let sp = m
            .handle_command(ManagerCommand::ChangeMode { mode: LocomotionMode::PointTurn }, t + 0.01)
            .unwrap();
        assert!(sp.is_stopped());
        assert!(matches!(m.state(), ManagerState::Reconfiguring { to: LocomotionMode::PointTurn, .. }));
        let mut now = t + 0.01;
        while matches!(m.state(), ManagerState::Reconfiguring { .. }) {
            now += 0.01;
            let out = m.tick(now);
            if matches!(m.state(), ManagerState::Reconfiguring { .. }) {
                assert!(out.is_stopped());
            }
        }
        assert_eq!(*m.state(), ManagerState::Driving(LocomotionMode::PointTurn));
    }

    #[test]
    fn estop_from_any_state() {
        for setup in 0..3 {
            let mut m = manager();
            let mut t = 0.0;
            if setup >= 1 {
                drive_into(&mut m, LocomotionMode::SkidSteer, &mut t);
            }
            if setup == 2 {
                m.handle_command(ManagerCommand::ChangeMode { mode: LocomotionMode::Crab }, t).unwrap();
            }
            let sp = m.handle_command(ManagerCommand::EStop, t).unwrap();
            assert!(sp.is_stopped());
            assert_eq!(*m.state(), ManagerState::Fault(FaultReason::EStop));
        }
    }

    #[test]
    fn fault_rejects_until_reset() {
        let mut m = manager();
        m.handle_command(ManagerCommand::EStop, 0.0).unwrap();
        let err = m
            .handle_command(
                ManagerCommand::Speed { command: BodyMotionCommand::PointTurn { omega_radps: 0.1 } },
                0.1,
            )
            .unwrap_err();
        assert!(matches!(err, ManagerError::InvalidCommandInState { .. }));
        assert!(m.handle_command(ManagerCommand::ChangeMode { mode: LocomotionMode::Crab }, 0.2).is_err());
        assert!(m.tick(0.3).is_stopped());
        m.handle_command(ManagerCommand::Reset, 0.4).unwrap();
        assert_eq!(*m.state(), ManagerState::Idle);
        assert!(m.handle_command(ManagerCommand::Reset, 0.5).is_err());
    }

    #[test]
    fn speed_during_reconfiguration_is_latched() {
        let mut m = manager();
        m.handle_command(ManagerCommand::ChangeMode { mode: LocomotionMode::PointTurn }, 0.0).unwrap();
        let sp = m
            .handle_command(
                ManagerCommand::Speed { command: BodyMotionCommand::PointTurn { omega_radps: 0.1 } },
                0.01,
            )
            .unwrap();
        assert!(sp.is_stopped());
        m.handle_command(
            ManagerCommand::Speed { command: BodyMotionCommand::PointTurn { omega_radps: 0.2 } },
            0.02,
        )
        .unwrap();
        let mut t = 0.02;
        let mut out = m.tick(t);
        while !matches!(m.state(), ManagerState::Driving(_)) {
            t += 0.01;
            out = m.tick(t);
        }
        assert!(out.is_stopped());
        out = m.tick(t + 0.01);
        let expected = inverse_kinematics(
            LocomotionMode::PointTurn,
            &BodyMotionCommand::PointTurn { omega_radps: 0.2 },
            m.geometry(),
        )
        .unwrap();
        assert_eq!(out.speed_radps, expected.speed_radps);
    }

    #[test]
    fn mismatched_speed_stops_rover() {
        let mut m = manager();
        let mut t = 0.0;
        drive_into(&mut m, LocomotionMode::Ackermann, &mut t);
        m.handle_command(
            ManagerCommand::Speed { command: BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.0 } },
            t,
        )
        .unwrap();
        let err = m.handle_command(
            ManagerCommand::Speed { command: BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 0.0 } },
            t,
        );
        assert!(err.is_err());
        assert_eq!(*m.state(), ManagerState::Driving(LocomotionMode::Ackermann));
        assert!(m.tick(t + 0.01).is_stopped());
    }

    #[test]
    fn out_of_limit_speed_rejected() {
        let mut m = manager();
        let mut t = 0.0;
        drive_into(&mut m, LocomotionMode::Crab, &mut t);
        let err = m
            .handle_command(
                ManagerCommand::Speed { command: BodyMotionCommand::Crab { v_mps: 0.5, heading_rad: 0.0 } },
                t,
            )
            .unwrap_err();
        assert!(matches!(err, ManagerError::Kinematics(KinematicsError::CommandOutOfLimits(_))));
    }

    #[test]
    fn steering_slews_while_driving() {
        let mut m = manager();
        let mut t = 0.0;
        drive_into(&mut m, LocomotionMode::Crab, &mut t);
        m.handle_command(
            ManagerCommand::Speed { command: BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 1.0 } },
            t,
        )
        .unwrap();
        let max_step = m.config().steering_profile.max_rate_radps * 0.01;
        let mut prev = m.steering_setpoints();
        for _ in 0..500 {
            t += 0.01;
            let out = m.tick(t);
            for i in 0..4 {
                assert!((out.steering_rad[i] - prev[i]).abs() <= max_step + 1e-12);
            }
            prev = out.steering_rad;
        }
        assert_eq!(prev, [1.0; 4]);
    }
}
