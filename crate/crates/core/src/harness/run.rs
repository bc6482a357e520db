use rayon::prelude::*;

use super::campaign::Campaign;
use super::report::MetricRow;
use super::{evaluate, Manoeuvre, Metrics, ObstacleOutcome, Segment, TestCase, TestReport, Thresholds};
use crate::kinematics::{BodyMotionCommand, LocomotionMode, Pose2p5, WHEEL_COUNT};
use crate::manager::{ManagerCommand, ManagerState};
use crate::sim::{derive_seed, obstacle_check, Obstacle, ObstacleVerdict, Scenario, Simulator, StartPose, TiltBed};

/// Interval at which scripted commands are re-sent, like a joystick stream.
const RESEND_S: f64 = 0.25;
/// Time given to the wheels to come to rest after a stop.
const SETTLE_S: f64 = 1.0;
/// Averaging window for tracked yaw before and after a point turn.
const YAW_WINDOW_S: f64 = 0.5;
/// Steering error at which a mode transition counts as finished.
const HOME_TOLERANCE_RAD: f64 = 0.05;

/// Order of modes visiting every ordered pair exactly once.
const MODE_TOUR: [LocomotionMode; 13] = {
    use LocomotionMode::*;
    [Ackermann, PointTurn, Ackermann, Crab, Ackermann, SkidSteer, PointTurn, Crab, PointTurn, SkidSteer, Crab, SkidSteer, Ackermann]
};

/// A finished case: its report and its per-tick table.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseRun {
    pub report: TestReport,
    pub rows: Vec<MetricRow>,
}

fn default_start(m: &Manoeuvre) -> Option<StartPose> {
    match m {
        Manoeuvre::ModeMatrix { .. } => Some(StartPose { x_m: 5.0, y_m: 2.75, yaw_deg: 0.0 }),
        Manoeuvre::UpSlope { .. } => Some(StartPose { x_m: 7.3, y_m: 2.75, yaw_deg: 0.0 }),
        Manoeuvre::CrossSlope { .. } => Some(StartPose { x_m: 8.25, y_m: 1.0, yaw_deg: 90.0 }),
        Manoeuvre::PointTurnOnSlope { .. } => Some(StartPose { x_m: 8.25, y_m: 2.75, yaw_deg: 0.0 }),
        _ => None,
    }
}

/// The world a case runs in: its scenario with the case's start, tilt and load applied.
fn case_scenario(case: &TestCase, base: &Scenario) -> Scenario {
    let mut s = base.clone();
    if let Some(start) = case.start.or_else(|| default_start(&case.manoeuvre)) {
        s.start = start;
    }
    if let Some(angle_deg) = case.manoeuvre.slope_deg() {
        let hinge_x_m = s.terrain.tilt_bed.map_or(s.terrain.size_m[0] - 3.5, |b| b.hinge_x_m);
        s.terrain.tilt_bed = Some(TiltBed { hinge_x_m, angle_deg });
    }
    if let Manoeuvre::Excavation { payload_kg, drag_n, .. } = case.manoeuvre {
        s.payload_kg = payload_kg;
        s.blade_drag_n = drag_n;
    }
    s
}

struct Driver<'a> {
    sim: Simulator,
    case_id: &'a str,
    rows: Vec<MetricRow>,
    max_current_a: f64,
    max_temp_c: f64,
    reconfiguration_violations: u64,
    slip: Option<Vec<(f64, f64)>>,
    tracked_yaw: Option<Vec<f64>>,
    last_tracked_t: Option<f64>,
    ok: bool,
}

struct Travel {
    start: Pose2p5<f64>,
    heading: f64,
    max_perp_m: f64,
}

impl Travel {
    fn along_perp(&self, p: &Pose2p5<f64>) -> (f64, f64) {
        let (dx, dy) = (p.x_m - self.start.x_m, p.y_m - self.start.y_m);
        let (s, c) = self.heading.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

impl<'a> Driver<'a> {
    fn new(sim: Simulator, case_id: &'a str) -> Self {
        Self {
            sim,
            case_id,
            rows: Vec::new(),
            max_current_a: 0.0,
            max_temp_c: f64::NEG_INFINITY,
            reconfiguration_violations: 0,
            slip: None,
            tracked_yaw: None,
            last_tracked_t: None,
            ok: true,
        }
    }

    fn halted(&self) -> bool {
        self.sim.terminal().is_some() || self.sim.manager().state().fault().is_some()
    }

    fn step(&mut self, travel: Option<&mut Travel>) {
        self.sim.step_control_period();
        let w = self.sim.world();
        if matches!(self.sim.manager().state(), ManagerState::Reconfiguring { .. })
            && self.sim.setpoints().speed_radps.iter().any(|s| *s != 0.0)
        {
            self.reconfiguration_violations += 1;
        }
        for m in w.wheel_motors.iter().chain(w.steering_motors.iter()) {
            self.max_current_a = self.max_current_a.max(m.current_a.abs());
            self.max_temp_c = self.max_temp_c.max(m.temp_c);
        }
        if let Some(t) = travel {
            t.max_perp_m = t.max_perp_m.max(t.along_perp(&w.true_pose).1.abs());
        }
        if let (Some(yaws), Some(m)) = (self.tracked_yaw.as_mut(), self.sim.tracked()) {
            if self.last_tracked_t != Some(m.t_s) && m.valid {
                yaws.push(m.pose.yaw_rad);
                self.last_tracked_t = Some(m.t_s);
            }
        }
        if self.sim.is_telemetry_tick() {
            let n = WHEEL_COUNT as f64;
            let slip_mean = w.slip.iter().sum::<f64>() / n;
            let slip_max = w.slip.iter().fold(0.0f64, |a, b| a.max(*b));
            if let Some(s) = self.slip.as_mut() {
                s.push((slip_mean, slip_max));
            }
            self.rows.push(MetricRow::sample(self.case_id, &self.sim));
        }
    }

    fn run_for(&mut self, secs: f64, mut travel: Option<&mut Travel>) {
        let end = self.sim.time_s() + secs;
        while self.sim.time_s() + 1e-9 < end && self.sim.terminal().is_none() {
            self.step(travel.as_deref_mut());
        }
    }

    /// Switches to `mode` and waits until the steering has physically arrived.
    fn enter(&mut self, mode: LocomotionMode, timeout_s: f64) -> bool {
        if self.sim.command(ManagerCommand::ChangeMode { mode }).is_err() {
            self.ok = false;
            return false;
        }
        let deadline = self.sim.time_s() + timeout_s;
        loop {
            let arrived = *self.sim.manager().state() == ManagerState::Driving(mode)
                && (0..WHEEL_COUNT).all(|i| {
                    (self.sim.world().wheels.steering_rad[i] - self.sim.setpoints().steering_rad[i]).abs()
                        <= HOME_TOLERANCE_RAD
                });
            if arrived {
                return true;
            }
            if self.halted() || self.sim.time_s() >= deadline {
                self.ok = false;
                return false;
            }
            self.step(None);
        }
    }

    /// Streams `cmd` for `secs`, stops and lets the wheels settle.
    /// Returns the streamed duration and the travel record.
    fn drive(&mut self, cmd: BodyMotionCommand<f64>, secs: f64) -> (f64, Travel) {
        let twist = cmd.twist();
        let start = self.sim.world().true_pose;
        let mut travel = Travel {
            start,
            heading: start.yaw_rad + twist.vy_mps.atan2(twist.vx_mps),
            max_perp_m: 0.0,
        };
        let t0 = self.sim.time_s();
        let end = t0 + secs;
        while self.sim.time_s() + 1e-9 < end {
            if self.halted() || self.sim.command(ManagerCommand::Speed { command: cmd }).is_err() {
                self.ok = false;
                return (self.sim.time_s() - t0, travel);
            }
            let chunk = (end - self.sim.time_s()).min(RESEND_S);
            self.run_for(chunk, Some(&mut travel));
        }
        let streamed = self.sim.time_s() - t0;
        let heading = match cmd {
            BodyMotionCommand::Crab { heading_rad, .. } => heading_rad,
            _ => 0.0,
        };
        let stop = BodyMotionCommand::stop(cmd.mode(), heading);
        if self.halted() || self.sim.command(ManagerCommand::Speed { command: stop }).is_err() {
            self.ok = false;
        }
        self.run_for(SETTLE_S, Some(&mut travel));
        (streamed, travel)
    }

    /// A straight run measured as one segment.
    fn segment(&mut self, cmd: BodyMotionCommand<f64>, distance_m: f64) -> Segment {
        let t = cmd.twist();
        let speed = t.vx_mps.hypot(t.vy_mps);
        let (streamed, travel) = self.drive(cmd, distance_m / speed);
        let (along, _) = travel.along_perp(&self.sim.world().true_pose);
        let sign = if t.vx_mps < 0.0 { -1.0 } else { 1.0 };
        Segment {
            commanded_mps: sign * speed,
            duration_s: streamed,
            distance_m: along,
            mean_speed_mps: if streamed > 0.0 { sign * along / streamed } else { 0.0 },
            cross_track_drift_m: travel.max_perp_m,
        }
    }

    fn circular_mean(samples: &[f64]) -> Option<f64> {
        if samples.is_empty() {
            return None;
        }
        let (s, c) = samples.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
        Some(s.atan2(c))
    }

    fn mean_tracked_yaw(&mut self, secs: f64) -> Option<f64> {
        self.tracked_yaw = Some(Vec::new());
        self.run_for(secs, None);
        let yaws = self.tracked_yaw.take().unwrap_or_default();
        Self::circular_mean(&yaws)
    }
}

fn wrap(a: f64) -> f64 {
    (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
}

fn slip_stats(samples: &[(f64, f64)]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / samples.len() as f64;
    let max = samples.iter().fold(0.0f64, |a, s| a.max(s.1));
    (mean, max)
}

fn script(d: &mut Driver, case: &TestCase, scenario: &Scenario, seed: u64, m: &mut Metrics) {
    let th: &Thresholds = &case.thresholds;
    match &case.manoeuvre {
        Manoeuvre::ModeMatrix { drive_s } => {
            m.transitions_total = (MODE_TOUR.len() - 1) as u32;
            for (k, mode) in MODE_TOUR.iter().enumerate() {
                if !d.enter(*mode, th.transition_timeout_s) {
                    break;
                }
                if k > 0 {
                    m.transitions_completed += 1;
                }
                let cmd = match mode {
                    LocomotionMode::Ackermann => BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.05 },
                    LocomotionMode::PointTurn => BodyMotionCommand::PointTurn { omega_radps: 0.1 },
                    LocomotionMode::Crab => BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 0.3 },
                    LocomotionMode::SkidSteer => BodyMotionCommand::Skid { v_mps: 0.05, omega_radps: 0.05 },
                };
                let cmd = if k % 2 == 1 { cmd.reversed() } else { cmd };
                d.drive(cmd, *drive_s);
            }
        }
        Manoeuvre::FlatTraverse { speeds_mps, distance_m } => {
            if d.enter(LocomotionMode::Ackermann, th.transition_timeout_s) {
                for (k, v) in speeds_mps.iter().enumerate() {
                    let v = if k % 2 == 0 { *v } else { -*v };
                    m.segments.push(d.segment(BodyMotionCommand::Ackermann { v_mps: v, omega_radps: 0.0 }, *distance_m));
                    if !d.ok {
                        break;
                    }
                }
            }
        }
        Manoeuvre::UpSlope { speed_mps, distance_m, .. } | Manoeuvre::CrossSlope { speed_mps, distance_m, .. } => {
            if d.enter(LocomotionMode::Ackermann, th.transition_timeout_s) {
                d.slip = Some(Vec::new());
                let cmd = BodyMotionCommand::Ackermann { v_mps: *speed_mps, omega_radps: 0.0 };
                let (streamed, travel) = d.drive(cmd, distance_m / speed_mps);
                let (along, _) = travel.along_perp(&d.sim.world().true_pose);
                m.segments.push(Segment {
                    commanded_mps: *speed_mps,
                    duration_s: streamed,
                    distance_m: along,
                    mean_speed_mps: if streamed > 0.0 { along / streamed } else { 0.0 },
                    cross_track_drift_m: travel.max_perp_m,
                });
                (m.slip_ratio_mean, m.slip_ratio_max) = slip_stats(&d.slip.take().unwrap_or_default());
            }
        }
        Manoeuvre::PointTurnOnSlope { omega_radps, turn_deg, .. } => {
            if d.enter(LocomotionMode::PointTurn, th.transition_timeout_s) {
                let before = d.mean_tracked_yaw(YAW_WINDOW_S);
                d.slip = Some(Vec::new());
                let (streamed, _) =
                    d.drive(BodyMotionCommand::PointTurn { omega_radps: *omega_radps }, turn_deg.to_radians() / omega_radps);
                (m.slip_ratio_mean, m.slip_ratio_max) = slip_stats(&d.slip.take().unwrap_or_default());
                let after = d.mean_tracked_yaw(YAW_WINDOW_S);
                if let (Some(a), Some(b)) = (before, after) {
                    if streamed > 0.0 {
                        m.yaw_efficiency = Some(wrap(b - a) / (omega_radps * streamed));
                    }
                }
            }
        }
        Manoeuvre::ObstacleRun { heights_m, speed_mps, distance_m } => {
            // One fresh world per height: the first one is the case's own driver.
            let r = scenario.rover.wheel_radius_m;
            for (k, h) in heights_m.iter().enumerate() {
                let mut s = scenario.clone();
                let x0 = s.start.x_m + 1.0;
                s.terrain.obstacles.push(Obstacle::rectangle(x0, 0.5, x0 + 0.3, s.terrain.size_m[1] - 0.5, *h));
                let sub = match Simulator::new(&s, &format!("{}-{k}", case.id), seed) {
                    Ok(sim) => sim,
                    Err(e) => {
                        m.terminal = Some(e.to_string());
                        d.ok = false;
                        return;
                    }
                };
                let prev = std::mem::replace(&mut d.sim, sub);
                let t_offset = prev.time_s() + m.sim_time_s;
                m.sim_time_s = t_offset;
                collect_events(&prev, m);
                let progress = if d.enter(LocomotionMode::Ackermann, th.transition_timeout_s) {
                    let cmd = BodyMotionCommand::Ackermann { v_mps: *speed_mps, omega_radps: 0.0 };
                    d.segment(cmd, *distance_m).distance_m
                } else {
                    0.0
                };
                m.obstacles.push(ObstacleOutcome {
                    height_m: *h,
                    height_over_radius: h / r,
                    traversed: progress >= th.completion_fraction * distance_m,
                    expected_traversable: obstacle_check(*h, r, f64::INFINITY) == ObstacleVerdict::Traversable,
                });
                if !d.ok {
                    break;
                }
            }
        }
        Manoeuvre::Excavation { speed_mps, distance_m, .. } => {
            if d.enter(LocomotionMode::Ackermann, th.transition_timeout_s) {
                for v in [*speed_mps, -*speed_mps] {
                    m.segments.push(d.segment(BodyMotionCommand::Ackermann { v_mps: v, omega_radps: 0.0 }, *distance_m));
                    if !d.ok {
                        break;
                    }
                }
            }
        }
    }
}

fn collect_events(sim: &Simulator, m: &mut Metrics) {
    let terminal = sim.terminal().map(|e| e.kind());
    for e in sim.events() {
        if Some(e.kind.as_str()) != terminal {
            m.faults.push(e.kind.clone());
        }
    }
    if let Some(e) = sim.terminal() {
        m.terminal = Some(e.to_string());
    }
}

/// Runs one case in its own world seeded with `seed`.
pub fn run_case(case: &TestCase, scenario: &Scenario, seed: u64) -> CaseRun {
    let s = case_scenario(case, scenario);
    let mut metrics = Metrics {
        current_limit_a: s.safety.max_motor_current_a,
        temp_limit_c: s.safety.max_motor_temp_c,
        ..Metrics::default()
    };
    let mut rows = Vec::new();
    match Simulator::new(&s, &case.id, seed) {
        Err(e) => metrics.terminal = Some(e.to_string()),
        Ok(mut sim) => {
            if let Some(w) = case.inject_steering_stall {
                sim.stall_steering(w);
            }
            let mut d = Driver::new(sim, &case.id);
            script(&mut d, case, &s, seed, &mut metrics);
            collect_events(&d.sim, &mut metrics);
            metrics.sim_time_s += d.sim.time_s();
            metrics.completed = d.ok && !d.halted() && metrics.terminal.is_none() && metrics.faults.is_empty();
            metrics.max_current_a = d.max_current_a;
            metrics.max_temp_c = d.max_temp_c;
            metrics.reconfiguration_speed_violations = d.reconfiguration_violations;
            rows = d.rows;
        }
    }
    metrics.summarize_segments();
    let verdict = evaluate(case, &metrics);
    CaseRun {
        report: TestReport {
            id: case.id.clone(),
            family: case.manoeuvre.family(),
            seed,
            case: case.clone(),
            metrics,
            verdict,
            trace_ref: format!("metrics.csv#case_id={}", case.id),
        },
        rows,
    }
}

/// Runs every case (or only `only`) in parallel; the result keeps campaign order.
pub fn run_campaign(campaign: &Campaign, seed: Option<u64>, only: Option<&str>) -> Vec<CaseRun> {
    let seed = seed.unwrap_or(campaign.seed);
    campaign
        .cases
        .par_iter()
        .filter(|c| only.is_none_or(|id| c.id == id))
        .map(|c| run_case(c, campaign.scenario_for(c), derive_seed(seed, &c.id)))
        .collect()
}

/// The twelve-transition mode tour on flat ground with default settings.
pub fn mode_matrix_case(seed: u64, inject_steering_stall: Option<usize>) -> CaseRun {
    let case = TestCase {
        id: "mode_matrix".into(),
        scenario: "flat".into(),
        manoeuvre: Manoeuvre::ModeMatrix { drive_s: 1.0 },
        expect: Default::default(),
        thresholds: Thresholds::default(),
        start: None,
        inject_steering_stall,
    };
    let mut flat = Scenario::default();
    flat.terrain.tilt_bed = None;
    run_case(&case, &flat, seed)
}
