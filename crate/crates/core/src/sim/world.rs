use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loads::{gravity_body, wheel_loads};
use super::obstacle::{climb_margin, obstacle_check, ObstacleVerdict};
use super::scenario::Scenario;
use super::terrain::{TerrainModel, TiltBed};
use super::tracking::{tracking_emulate, TrackingMeasurement};
use super::traction::{traction_step, TractionInput, TractionOutput};
use super::SimError;
use crate::control::{MotorState, SteeringActuator, WheelActuator};
use crate::kinematics::{
    forward_odometry, integrate_pose, BodyTwist, Point2, Pose2p5, RoverGeometry, WheelArray, WHEEL_COUNT,
};
use crate::manager::{
    ActuatorSample, FaultReason, Health, HealthSample, LocomotionManager, ManagerCommand, ManagerError,
    ManagerState, Supervisor,
};
use crate::telemetry::{PoseFrame, StateTag, TelemetryFrame, TwistFrame, WheelFrame};

/// Lever arm of the soil's resistance to steering a loaded wheel in place.
const SCRUB_ARM_M: f64 = 0.005;
/// Steering rate at which scrub reaches its full value.
const SCRUB_RATE_RADPS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub time_s: f64,
    pub true_pose: Pose2p5<f64>,
    /// Dead reckoning from measured wheel states, for comparison with truth.
    pub odometry_pose: Pose2p5<f64>,
    pub wheels: WheelArray<f64>,
    pub wheel_motors: [MotorState<f64>; WHEEL_COUNT],
    pub steering_motors: [MotorState<f64>; WHEEL_COUNT],
    pub payload_kg: f64,
    pub blade_drag_n: f64,
    pub loads_n: [f64; WHEEL_COUNT],
    pub slip: [f64; WHEEL_COUNT],
    pub commanded_twist: BodyTwist<f64>,
    pub actual_twist: BodyTwist<f64>,
    /// Obstacle height each wheel currently stands on.
    pub climbed_m: [f64; WHEEL_COUNT],
    /// The last pose update was refused at an obstacle.
    pub blocked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimEvent {
    pub t_s: f64,
    pub kind: String,
}

/// Single stepper for one world. Owns the manager, the actuator loops and the generator.
#[derive(Clone, Debug)]
pub struct Simulator {
    scenario: Scenario,
    name: String,
    terrain: TerrainModel,
    geometry: RoverGeometry<f64>,
    manager: LocomotionManager<f64>,
    supervisor: Supervisor<f64>,
    wheel_act: [WheelActuator<f64>; WHEEL_COUNT],
    steer_act: [SteeringActuator<f64>; WHEEL_COUNT],
    setpoints: WheelArray<f64>,
    wheel_load: [f64; WHEEL_COUNT],
    steer_load: [f64; WHEEL_COUNT],
    world: WorldState,
    rng: ChaCha8Rng,
    tracked: Option<TrackingMeasurement>,
    terminal: Option<SimError>,
    events: Vec<SimEvent>,
    dt: f64,
    control_every: u64,
    telemetry_every: u64,
}

impl Simulator {
    pub fn new(scenario: &Scenario, name: &str, seed: u64) -> Result<Self, SimError> {
        scenario.validate()?;
        let terrain = TerrainModel::new(&scenario.terrain)?;
        let mut geometry = scenario.rover.clone();
        geometry.payload_mass_kg = scenario.payload_kg;
        let r = geometry.wheel_radius_m;
        let mut wheel_params = scenario.control.wheel_motor;
        wheel_params.inertia_kg_m2 += scenario.payload_kg * r * r / WHEEL_COUNT as f64;
        let wheel_act = [WheelActuator::new(scenario.control.wheel_velocity, wheel_params); WHEEL_COUNT];
        let steer_act = [SteeringActuator::new(&scenario.control, 0.0); WHEEL_COUNT];
        let rates = scenario.rates;
        let start = scenario.start;
        let pose = Pose2p5::planar(start.x_m, start.y_m, start.yaw_deg.to_radians());

        let mut sim = Self {
            name: name.to_string(),
            terrain,
            manager: LocomotionManager::new(geometry.clone(), scenario.manager.clone()),
            supervisor: Supervisor::new(scenario.safety),
            geometry,
            wheel_act,
            steer_act,
            setpoints: WheelArray::default(),
            wheel_load: [0.0; WHEEL_COUNT],
            steer_load: [0.0; WHEEL_COUNT],
            world: WorldState {
                tick: 0,
                time_s: 0.0,
                true_pose: pose,
                odometry_pose: pose,
                wheels: WheelArray::default(),
                wheel_motors: [MotorState::at_rest(&wheel_params); WHEEL_COUNT],
                steering_motors: [MotorState::at_rest(&scenario.control.steering_motor); WHEEL_COUNT],
                payload_kg: scenario.payload_kg,
                blade_drag_n: scenario.blade_drag_n,
                loads_n: [0.0; WHEEL_COUNT],
                slip: [0.0; WHEEL_COUNT],
                commanded_twist: BodyTwist::default(),
                actual_twist: BodyTwist::default(),
                climbed_m: [0.0; WHEEL_COUNT],
                blocked: false,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            tracked: None,
            terminal: None,
            events: Vec::new(),
            dt: 1.0 / rates.physics_hz as f64,
            control_every: (rates.physics_hz / rates.control_hz) as u64,
            telemetry_every: (rates.physics_hz / rates.telemetry_hz) as u64,
            scenario: scenario.clone(),
        };
        sim.place()?;
        Ok(sim)
    }

    /// Puts the rover on the ground at its current planar pose.
    fn place(&mut self) -> Result<(), SimError> {
        let mut climbed = [0.0; WHEEL_COUNT];
        let contacts = self.geometry.contacts(&self.world.wheels.steering_rad);
        for (i, c) in contacts.iter().enumerate() {
            let (x, y) = to_world(&self.world.true_pose, *c);
            climbed[i] = self.terrain.obstacle_height_at(x, y);
        }
        let pose = self.attitude(self.world.true_pose, &contacts, &climbed)?;
        let loads = self.loads(&pose)?;
        self.world.true_pose = pose;
        self.world.climbed_m = climbed;
        self.world.loads_n = loads;
        Ok(())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn manager(&self) -> &LocomotionManager<f64> {
        &self.manager
    }

    pub fn geometry(&self) -> &RoverGeometry<f64> {
        &self.geometry
    }

    pub fn terrain(&self) -> &TerrainModel {
        &self.terrain
    }

    /// Setpoints issued at the last control tick.
    pub fn setpoints(&self) -> &WheelArray<f64> {
        &self.setpoints
    }

    pub fn tracked(&self) -> Option<&TrackingMeasurement> {
        self.tracked.as_ref()
    }

    pub fn terminal(&self) -> Option<&SimError> {
        self.terminal.as_ref()
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn time_s(&self) -> f64 {
        self.world.time_s
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn control_period_s(&self) -> f64 {
        self.dt * self.control_every as f64
    }

    /// True when the last completed tick was a telemetry tick.
    pub fn is_telemetry_tick(&self) -> bool {
        self.world.tick.is_multiple_of(self.telemetry_every)
    }

    /// Jams one steering joint so it no longer moves.
    pub fn stall_steering(&mut self, wheel: usize) {
        self.steer_act[wheel].stalled = true;
    }

    pub fn set_tilt(&mut self, angle_deg: f64) -> Result<(), SimError> {
        let hinge_x_m = self.terrain.tilt().map_or(self.terrain.size_m()[0] - 3.5, |b| b.hinge_x_m);
        let previous = self.terrain.tilt();
        self.terrain.set_tilt(TiltBed { hinge_x_m, angle_deg })?;
        if let Err(e) = self.place() {
            match previous {
                Some(bed) => self.terrain.set_tilt(bed)?,
                None => self.terrain.set_tilt(TiltBed { hinge_x_m, angle_deg: 0.0 })?,
            }
            return Err(e);
        }
        Ok(())
    }

    pub fn set_payload(&mut self, payload_kg: f64, blade_drag_n: f64) -> Result<(), SimError> {
        let mut s = self.scenario.clone();
        s.payload_kg = payload_kg;
        s.blade_drag_n = blade_drag_n;
        s.validate()?;
        self.world.payload_kg = payload_kg;
        self.world.blade_drag_n = blade_drag_n;
        self.geometry.payload_mass_kg = payload_kg;
        self.scenario = s;
        Ok(())
    }

    pub fn command(&mut self, cmd: ManagerCommand<f64>) -> Result<WheelArray<f64>, ManagerError> {
        let was_fault = self.manager.state().fault().is_some();
        let out = self.manager.handle_command(cmd, self.world.time_s);
        if was_fault && matches!(self.manager.state(), ManagerState::Idle) {
            self.supervisor.reset();
        }
        if let (false, Some(r)) = (was_fault, self.manager.state().fault()) {
            self.record(r.as_str());
        }
        out
    }

    fn record(&mut self, kind: &str) {
        self.events.push(SimEvent {
            t_s: self.world.time_s,
            kind: kind.to_string(),
        });
    }

    fn terminate(&mut self, e: SimError) {
        self.record(e.kind());
        self.terminal = Some(e);
        self.manager.enter_fault(FaultReason::SimulationTerminated);
        self.setpoints = WheelArray::stopped(self.setpoints.steering_rad);
    }

    pub fn advance(&mut self, seconds: f64) {
        let n = (seconds / self.dt).round() as u64;
        for _ in 0..n {
            self.step();
        }
    }

    /// Runs physics ticks up to and including the next control update.
    pub fn step_control_period(&mut self) {
        loop {
            self.step();
            if self.world.tick.is_multiple_of(self.control_every) || self.terminal.is_some() {
                break;
            }
        }
    }

    /// One physics tick.
    pub fn step(&mut self) {
        if self.terminal.is_some() {
            return;
        }
        let k = self.world.tick;
        let dt = self.dt;
        if k.is_multiple_of(self.control_every) {
            self.control(k as f64 * dt);
        }

        for i in 0..WHEEL_COUNT {
            self.wheel_act[i].physics(self.wheel_load[i], dt);
            self.steer_act[i].physics(self.steer_load[i], dt);
        }
        let wheels = WheelArray::new(
            self.steer_act.map(|a| a.angle_rad),
            self.wheel_act.map(|a| a.motor.speed_radps),
        );
        if let Ok(o) = forward_odometry(&wheels, &self.geometry) {
            self.world.odometry_pose = integrate_pose(&self.world.odometry_pose, &o.twist, dt);
        }

        let pose = self.world.true_pose;
        let loads = match self.loads(&pose) {
            Ok(n) => n,
            Err(e) => return self.terminate(e),
        };
        let mass = self.geometry.total_mass_kg();
        let g = gravity_body(pose.pitch_rad, pose.roll_rad);
        let vx_cmd = self.world.commanded_twist.vx_mps;
        let drag = if vx_cmd.abs() > 1e-9 { -self.world.blade_drag_n * vx_cmd.signum() } else { 0.0 };
        let input = TractionInput {
            wheels,
            travel_sign: self.setpoints.speed_radps.map(|s| if s == 0.0 { 0.0 } else { s.signum() }),
            loads_n: loads,
            external_force_n: [mass * g[0] + drag, mass * g[1]],
        };
        let out = traction_step(&input, &self.geometry, &self.scenario.soil);

        let (sp, cp) = pose.pitch_rad.sin_cos();
        let (sr, cr) = pose.roll_rad.sin_cos();
        let t = out.twist;
        let level = BodyTwist::new(cp * t.vx_mps + sp * sr * t.vy_mps, cr * t.vy_mps, t.omega_radps * cp * cr);
        let candidate = integrate_pose(&pose, &level, dt);
        match self.settle(candidate, &wheels.steering_rad, &out, &loads) {
            Ok(Some((next, climbed))) => {
                self.world.true_pose = next;
                self.world.climbed_m = climbed;
                self.world.slip = out.slip;
                self.world.actual_twist = out.twist;
                self.world.blocked = false;
            }
            Ok(None) => {
                self.world.slip = input.travel_sign.map(|s| s.abs());
                self.world.actual_twist = BodyTwist::default();
                self.world.blocked = true;
            }
            Err(e) => return self.terminate(e),
        }

        for i in 0..WHEEL_COUNT {
            let rate = self.steer_act[i].motor.speed_radps;
            self.steer_load[i] = SCRUB_ARM_M * loads[i] * (rate / SCRUB_RATE_RADPS).clamp(-1.0, 1.0);
        }
        self.wheel_load = out.load_torque_nm;
        self.world.loads_n = loads;
        self.world.wheels = wheels;
        self.world.wheel_motors = self.wheel_act.map(|a| a.motor);
        self.world.steering_motors = self.steer_act.map(|a| a.motor);
        self.world.tick = k + 1;
        self.world.time_s = (k + 1) as f64 * dt;

        let hz = self.scenario.rates.tracking_hz as u64;
        let phys = self.scenario.rates.physics_hz as u64;
        if (k + 1) * hz / phys > k * hz / phys {
            self.tracked = Some(tracking_emulate(
                &self.world.true_pose,
                self.world.time_s,
                &self.scenario.tracking,
                &mut self.rng,
            ));
        }
    }

    fn control(&mut self, now: f64) {
        self.setpoints = self.manager.tick(now);
        if self.manager.state().fault().is_none() {
            let sample = HealthSample {
                now_s: now,
                wheels: std::array::from_fn(|i| ActuatorSample {
                    setpoint: self.setpoints.speed_radps[i],
                    measured: self.wheel_act[i].motor.speed_radps,
                    current_a: self.wheel_act[i].motor.current_a,
                    temp_c: self.wheel_act[i].motor.temp_c,
                }),
                steering: std::array::from_fn(|i| ActuatorSample {
                    setpoint: self.setpoints.steering_rad[i],
                    measured: self.steer_act[i].angle_rad,
                    current_a: self.steer_act[i].motor.current_a,
                    temp_c: self.steer_act[i].motor.temp_c,
                }),
                last_motion_command_s: self.manager.last_motion_command_s(),
            };
            if let Health::Fault(reason) = self.supervisor.check(&sample) {
                self.manager.enter_fault(reason);
                self.record(reason.as_str());
                self.setpoints = WheelArray::stopped(self.setpoints.steering_rad);
            }
        }
        self.world.commanded_twist = match (self.manager.state(), self.manager.active_command()) {
            (ManagerState::Driving(_), Some(cmd)) => cmd.twist(),
            _ => BodyTwist::default(),
        };
        let ctrl_dt = self.control_period_s();
        for i in 0..WHEEL_COUNT {
            self.wheel_act[i].control(self.setpoints.speed_radps[i], ctrl_dt);
            self.steer_act[i].control(self.setpoints.steering_rad[i], ctrl_dt);
        }
    }

    fn loads(&self, pose: &Pose2p5<f64>) -> Result<[f64; WHEEL_COUNT], SimError> {
        let contacts = self.geometry.contacts(&self.steer_act.map(|a| a.angle_rad));
        wheel_loads(
            &contacts,
            self.geometry.cog(),
            self.geometry.total_mass_kg(),
            pose.pitch_rad,
            pose.roll_rad,
        )
    }

    /// Resolves obstacle contacts and attitude at a candidate pose.
    /// `Ok(None)` means a wheel met a step it cannot climb.
    #[allow(clippy::type_complexity)]
    fn settle(
        &self,
        candidate: Pose2p5<f64>,
        steering: &[f64; WHEEL_COUNT],
        traction: &TractionOutput,
        loads: &[f64; WHEEL_COUNT],
    ) -> Result<Option<(Pose2p5<f64>, [f64; WHEEL_COUNT])>, SimError> {
        let contacts = self.geometry.contacts(steering);
        let mut climbed = self.world.climbed_m;
        let capacity: f64 = traction.capacity_n.iter().sum();
        let demand: f64 = traction.demand_n.iter().map(|d| d.max(0.0)).sum();
        for (i, c) in contacts.iter().enumerate() {
            let (x, y) = to_world(&candidate, *c);
            if !self.terrain.contains(x, y) {
                return Err(SimError::OutOfBounds { x_m: x, y_m: y });
            }
            let h = self.terrain.obstacle_height_at(x, y);
            let step = h - climbed[i];
            if step > 0.0 {
                let r = self.geometry.wheel_radius_m;
                let margin = climb_margin(capacity, loads[i], step, r, demand);
                if obstacle_check(step, r, margin) == ObstacleVerdict::Blocked {
                    return Ok(None);
                }
            }
            climbed[i] = h;
        }
        let pose = self.attitude(candidate, &contacts, &climbed)?;
        Ok(Some((pose, climbed)))
    }

    /// Pitch and roll of the plane fitted through the four contact heights.
    fn attitude(
        &self,
        pose: Pose2p5<f64>,
        contacts: &[Point2<f64>; WHEEL_COUNT],
        climbed: &[f64; WHEEL_COUNT],
    ) -> Result<Pose2p5<f64>, SimError> {
        let mut pts = [[0.0; 3]; WHEEL_COUNT];
        for (i, c) in contacts.iter().enumerate() {
            let (x, y) = to_world(&pose, *c);
            pts[i] = [x, y, self.terrain.query(x, y)?.height_m + climbed[i]];
        }
        let n = WHEEL_COUNT as f64;
        let mean = |k: usize| pts.iter().map(|p| p[k]).sum::<f64>() / n;
        let (mx, my, mz) = (mean(0), mean(1), mean(2));
        let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &pts {
            let (dx, dy, dz) = (p[0] - mx, p[1] - my, p[2] - mz);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
            sxz += dx * dz;
            syz += dy * dz;
        }
        let det = sxx * syy - sxy * sxy;
        if det.abs() < 1e-12 {
            return Err(SimError::DegenerateContacts);
        }
        let gx = (sxz * syy - syz * sxy) / det;
        let gy = (syz * sxx - sxz * sxy) / det;
        let norm = (gx * gx + gy * gy + 1.0).sqrt();
        let (nx, ny, nz) = (-gx / norm, -gy / norm, 1.0 / norm);
        let (sy, cy) = pose.yaw_rad.sin_cos();
        let hx = cy * nx + sy * ny;
        let hy = -sy * nx + cy * ny;
        Ok(Pose2p5 {
            pitch_rad: hx.atan2(nz),
            roll_rad: -hy.asin(),
            ..pose
        })
    }

    pub fn telemetry(&self) -> TelemetryFrame {
        let state = match self.manager.state() {
            ManagerState::Idle => StateTag::Idle,
            ManagerState::Driving(_) => StateTag::Driving,
            ManagerState::Reconfiguring { .. } => StateTag::Reconfiguring,
            ManagerState::Fault(_) => StateTag::Fault,
        };
        let w = &self.world;
        let pose = |p: &Pose2p5<f64>| PoseFrame {
            x_m: p.x_m as f32,
            y_m: p.y_m as f32,
            yaw_rad: p.yaw_rad as f32,
            pitch_rad: p.pitch_rad as f32,
            roll_rad: p.roll_rad as f32,
        };
        let twist = |t: &BodyTwist<f64>| TwistFrame {
            vx_mps: t.vx_mps as f32,
            vy_mps: t.vy_mps as f32,
            omega_radps: t.omega_radps as f32,
        };
        TelemetryFrame {
            t_ms: w.tick * 1000 / self.scenario.rates.physics_hz as u64,
            state,
            mode: self.manager.state().mode(),
            fault: self.manager.state().fault(),
            commanded: twist(&w.commanded_twist),
            actual: twist(&w.actual_twist),
            wheels: std::array::from_fn(|i| WheelFrame {
                steering_rad: w.wheels.steering_rad[i] as f32,
                steering_setpoint_rad: self.setpoints.steering_rad[i] as f32,
                speed_radps: w.wheels.speed_radps[i] as f32,
                speed_setpoint_radps: self.setpoints.speed_radps[i] as f32,
                current_a: w.wheel_motors[i].current_a as f32,
                temp_c: w.wheel_motors[i].temp_c as f32,
                steering_current_a: w.steering_motors[i].current_a as f32,
                steering_temp_c: w.steering_motors[i].temp_c as f32,
                slip: w.slip[i] as f32,
            }),
            true_pose: pose(&w.true_pose),
            tracked_pose: self.tracked.as_ref().map(|m| pose(&m.pose)),
            tilt_deg: self.terrain.tilt().map_or(0.0, |b| b.angle_deg) as f32,
            scenario: self.name.clone(),
            last_client: None,
            advisory: self.terminal.as_ref().map(|e| e.to_string()),
        }
    }
}

fn to_world(pose: &Pose2p5<f64>, c: Point2<f64>) -> (f64, f64) {
    let (s, co) = pose.yaw_rad.sin_cos();
    (pose.x_m + co * c.x - s * c.y, pose.y_m + s * c.x + co * c.y)
}
