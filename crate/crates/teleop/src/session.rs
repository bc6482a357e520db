use std::collections::{BTreeMap, HashMap};

use emrs_core::kinematics::BodyMotionCommand;
use emrs_core::manager::{ManagerCommand, ManagerState};
use emrs_core::sim::{Scenario, SimError, Simulator};
use emrs_core::telemetry::TelemetryFrame;
use thiserror::Error;

use crate::protocol::{ClientCommand, ClientMessage};

pub const WATCHDOG_ADVISORY: &str = "CommandTimeout: no operator command for 0.5 s, rover stopped";

/// Operator silence detector. Fires once per silence episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Watchdog {
    pub timeout_s: f64,
    last_command_s: Option<f64>,
    fired: bool,
}

impl Watchdog {
    pub fn new(timeout_s: f64) -> Self {
        Self { timeout_s, last_command_s: None, fired: false }
    }

    pub fn on_command(&mut self, now_s: f64) {
        self.last_command_s = Some(now_s);
        self.fired = false;
    }

    /// True exactly once when silence exceeds the timeout while `driving`.
    pub fn check(&mut self, now_s: f64, driving: bool) -> bool {
        match self.last_command_s {
            Some(t) if driving && !self.fired && now_s - t > self.timeout_s => {
                self.fired = true;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("sequence number {got} not above {last}")]
    OutOfOrder { got: u64, last: u64 },
    #[error("rover is in fault; reset first")]
    Faulted,
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// What happened during one advance of the session clock.
#[derive(Clone, Debug, PartialEq)]
pub enum SessionEvent {
    Telemetry(Box<TelemetryFrame>),
    WatchdogStop,
}

/// The server's single world: scenario library, simulator, watchdog and per-client audit.
///
/// Time is the session clock: simulation time summed across scenario loads,
/// so telemetry timestamps never go backwards.
pub struct Session {
    library: BTreeMap<String, Scenario>,
    seed: u64,
    scenario: String,
    sim: Simulator,
    offset_s: f64,
    watchdog: Watchdog,
    last_client: Option<u64>,
    advisory: Option<String>,
    last_seq: HashMap<u64, u64>,
}

impl Session {
    pub fn new(library: BTreeMap<String, Scenario>, scenario: &str, seed: u64) -> Result<Self, SessionError> {
        let s = library.get(scenario).ok_or_else(|| SessionError::UnknownScenario(scenario.into()))?;
        let sim = Simulator::new(s, scenario, seed)?;
        Ok(Self {
            watchdog: Watchdog::new(s.safety.command_timeout_s),
            library,
            seed,
            scenario: scenario.to_string(),
            sim,
            offset_s: 0.0,
            last_client: None,
            advisory: None,
            last_seq: HashMap::new(),
        })
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn scenarios(&self) -> Vec<String> {
        self.library.keys().cloned().collect()
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn time_s(&self) -> f64 {
        self.offset_s + self.sim.time_s()
    }

    pub fn forget_client(&mut self, client: u64) {
        self.last_seq.remove(&client);
    }

    /// Applies one client message at the current session time.
    pub fn handle(&mut self, client: u64, msg: ClientMessage) -> Result<(), SessionError> {
        if let Some(seq) = msg.seq {
            if let Some(&last) = self.last_seq.get(&client) {
                if seq <= last {
                    return Err(SessionError::OutOfOrder { got: seq, last });
                }
            }
            self.last_seq.insert(client, seq);
        }
        let manager_cmd = match msg.command {
            ClientCommand::Speed(command) => {
                if self.sim.manager().state().fault().is_some() {
                    return Err(SessionError::Faulted);
                }
                ManagerCommand::Speed { command }
            }
            ClientCommand::ChangeMode { mode } => ManagerCommand::ChangeMode { mode },
            ClientCommand::EStop => ManagerCommand::EStop,
            ClientCommand::Reset => ManagerCommand::Reset,
            ClientCommand::LoadScenario { name } => {
                let s = self.library.get(&name).ok_or_else(|| SessionError::UnknownScenario(name.clone()))?;
                let sim = Simulator::new(s, &name, self.seed)?;
                self.offset_s += self.sim.time_s();
                self.sim = sim;
                self.watchdog = Watchdog::new(s.safety.command_timeout_s);
                self.scenario = name;
                self.advisory = None;
                self.last_client = Some(client);
                return Ok(());
            }
            ClientCommand::SetTilt { angle_deg } => {
                self.sim.set_tilt(angle_deg)?;
                self.last_client = Some(client);
                return Ok(());
            }
        };
        let now = self.sim.time_s();
        self.sim.command(manager_cmd).map_err(|e| SessionError::Rejected(e.to_string()))?;
        self.watchdog.on_command(now);
        self.last_client = Some(client);
        self.advisory = None;
        Ok(())
    }

    /// Steps the simulator one control period at a time until the session clock reaches `t_s`.
    pub fn advance_to(&mut self, t_s: f64) -> Vec<SessionEvent> {
        let mut events = Vec::new();
        let period = self.sim.control_period_s();
        while self.time_s() + period <= t_s + 1e-9 && self.sim.terminal().is_none() {
            let driving = matches!(self.sim.manager().state(), ManagerState::Driving(_));
            if self.watchdog.check(self.sim.time_s(), driving) {
                if let ManagerState::Driving(mode) = *self.sim.manager().state() {
                    let heading = match self.sim.manager().active_command() {
                        Some(BodyMotionCommand::Crab { heading_rad, .. }) => *heading_rad,
                        _ => 0.0,
                    };
                    let _ = self.sim.command(ManagerCommand::Speed { command: BodyMotionCommand::stop(mode, heading) });
                    self.advisory = Some(WATCHDOG_ADVISORY.to_string());
                    events.push(SessionEvent::WatchdogStop);
                }
            }
            self.sim.step_control_period();
            if self.sim.is_telemetry_tick() {
                events.push(SessionEvent::Telemetry(Box::new(self.telemetry())));
            }
        }
        events
    }

    pub fn telemetry(&self) -> TelemetryFrame {
        let mut f = self.sim.telemetry();
        f.t_ms = (self.time_s() * 1000.0).round() as u64;
        f.last_client = self.last_client;
        if f.advisory.is_none() {
            f.advisory = self.advisory.clone();
        }
        f
    }
}
