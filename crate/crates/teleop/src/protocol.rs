//! Wire schema: one JSON object per WebSocket text frame, discriminated by `type`.
//!
//! Client to server:
//!
//! | type            | fields                                                       |
//! |-----------------|--------------------------------------------------------------|
//! | `speed`         | `mode` plus `v` (m/s), `omega` (rad/s), `heading` (rad) as the mode needs |
//! | `change_mode`   | `mode`                                                       |
//! | `estop`         |                                                              |
//! | `reset`         |                                                              |
//! | `load_scenario` | `name`                                                       |
//! | `set_tilt`      | `angle_deg`, 0 to 30                                         |
//!
//! Every client message may carry an increasing `seq`. Speed payloads per mode:
//! `ackermann` and `skid_steer` take `v` and `omega`, `point_turn` takes `omega`,
//! `crab` takes `v` and `heading`.
//!
//! Server to client: `hello` on connect, `telemetry` at 20 Hz, `error` for any
//! rejected message. Telemetry numbers carry nine significant digits.

use std::io;

use emrs_core::kinematics::{BodyMotionCommand, LocomotionMode};
use emrs_core::sim::MAX_TILT_DEG;
use emrs_core::telemetry::TelemetryFrame;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Longest accepted scenario name.
pub const MAX_NAME_LEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum ClientCommand {
    Speed(BodyMotionCommand<f64>),
    ChangeMode { mode: LocomotionMode },
    EStop,
    Reset,
    LoadScenario { name: String },
    SetTilt { angle_deg: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientMessage {
    pub command: ClientCommand,
    pub seq: Option<u64>,
}

impl From<ClientCommand> for ClientMessage {
    fn from(command: ClientCommand) -> Self {
        Self { command, seq: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
}

fn malformed(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::MalformedMessage(msg.into())
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<LocomotionMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seq: Option<u64>,
}

impl Wire {
    fn allow_only(&self, allowed: &[&str]) -> Result<(), ProtocolError> {
        let present = [
            ("mode", self.mode.is_some()),
            ("v", self.v.is_some()),
            ("omega", self.omega.is_some()),
            ("heading", self.heading.is_some()),
            ("name", self.name.is_some()),
            ("angle_deg", self.angle_deg.is_some()),
        ];
        match present.iter().find(|(f, p)| *p && !allowed.contains(f)) {
            Some((f, _)) => Err(malformed(format!("field `{f}` not allowed here"))),
            None => Ok(()),
        }
    }
}

fn required<T>(v: Option<T>, field: &str) -> Result<T, ProtocolError> {
    v.ok_or_else(|| malformed(format!("missing field `{field}`")))
}

fn finite(v: Option<f64>, field: &str) -> Result<f64, ProtocolError> {
    let x = required(v, field)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(malformed(format!("`{field}` must be finite")))
    }
}

/// Strict parse of one client text frame.
pub fn decode_command(text: &str) -> Result<ClientMessage, ProtocolError> {
    let w: Wire = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let command = match w.kind.as_str() {
        "speed" => {
            let mode = required(w.mode, "mode")?;
            let cmd = match mode {
                LocomotionMode::Ackermann => {
                    w.allow_only(&["mode", "v", "omega"])?;
                    BodyMotionCommand::Ackermann { v_mps: finite(w.v, "v")?, omega_radps: finite(w.omega, "omega")? }
                }
                LocomotionMode::PointTurn => {
                    w.allow_only(&["mode", "omega"])?;
                    BodyMotionCommand::PointTurn { omega_radps: finite(w.omega, "omega")? }
                }
                LocomotionMode::Crab => {
                    w.allow_only(&["mode", "v", "heading"])?;
                    BodyMotionCommand::Crab { v_mps: finite(w.v, "v")?, heading_rad: finite(w.heading, "heading")? }
                }
                LocomotionMode::SkidSteer => {
                    w.allow_only(&["mode", "v", "omega"])?;
                    BodyMotionCommand::Skid { v_mps: finite(w.v, "v")?, omega_radps: finite(w.omega, "omega")? }
                }
            };
            ClientCommand::Speed(cmd)
        }
        "change_mode" => {
            w.allow_only(&["mode"])?;
            ClientCommand::ChangeMode { mode: required(w.mode, "mode")? }
        }
        "estop" => {
            w.allow_only(&[])?;
            ClientCommand::EStop
        }
        "reset" => {
            w.allow_only(&[])?;
            ClientCommand::Reset
        }
        "load_scenario" => {
            w.allow_only(&["name"])?;
            let name = required(w.name, "name")?;
            if name.is_empty() || name.len() > MAX_NAME_LEN {
                return Err(malformed(format!("`name` must be 1 to {MAX_NAME_LEN} bytes")));
            }
            ClientCommand::LoadScenario { name }
        }
        "set_tilt" => {
            w.allow_only(&["angle_deg"])?;
            let angle_deg = finite(w.angle_deg, "angle_deg")?;
            if !(0.0..=MAX_TILT_DEG).contains(&angle_deg) {
                return Err(malformed(format!("`angle_deg` {angle_deg} outside 0..={MAX_TILT_DEG}")));
            }
            ClientCommand::SetTilt { angle_deg }
        }
        other => return Err(malformed(format!("unknown message type `{other}`"))),
    };
    Ok(ClientMessage { command, seq: w.seq })
}

pub fn encode_command(msg: &ClientMessage) -> String {
    let mut w = Wire { seq: msg.seq, ..Wire::default() };
    w.kind = match &msg.command {
        ClientCommand::Speed(cmd) => {
            w.mode = Some(cmd.mode());
            match *cmd {
                BodyMotionCommand::Ackermann { v_mps, omega_radps } | BodyMotionCommand::Skid { v_mps, omega_radps } => {
                    w.v = Some(v_mps);
                    w.omega = Some(omega_radps);
                }
                BodyMotionCommand::PointTurn { omega_radps } => w.omega = Some(omega_radps),
                BodyMotionCommand::Crab { v_mps, heading_rad } => {
                    w.v = Some(v_mps);
                    w.heading = Some(heading_rad);
                }
            }
            "speed"
        }
        ClientCommand::ChangeMode { mode } => {
            w.mode = Some(*mode);
            "change_mode"
        }
        ClientCommand::EStop => "estop",
        ClientCommand::Reset => "reset",
        ClientCommand::LoadScenario { name } => {
            w.name = Some(name.clone());
            "load_scenario"
        }
        ClientCommand::SetTilt { angle_deg } => {
            w.angle_deg = Some(*angle_deg);
            "set_tilt"
        }
    }
    .to_string();
    serde_json::to_string(&w).expect("wire struct serializes")
}

/// Compact JSON with every f32 written as nine significant digits.
struct NineDigits;

impl serde_json::ser::Formatter for NineDigits {
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.8e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

fn to_text<T: Serialize>(value: &T) -> String {
    let mut out = Vec::with_capacity(1024);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, NineDigits);
    value.serialize(&mut ser).expect("frame serializes");
    String::from_utf8(out).expect("JSON is UTF-8")
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub client_id: u64,
    pub version: String,
    pub scenario: String,
    pub scenarios: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorFrame {
    pub message: String,
    pub seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServerMessage {
    Hello(Hello),
    Telemetry(Box<TelemetryFrame>),
    Error(ErrorFrame),
}

pub fn encode_telemetry(frame: &TelemetryFrame) -> String {
    to_text(&Tagged { kind: "telemetry", body: frame })
}

pub fn encode_server(msg: &ServerMessage) -> String {
    match msg {
        ServerMessage::Hello(h) => to_text(&Tagged { kind: "hello", body: h }),
        ServerMessage::Telemetry(f) => encode_telemetry(f),
        ServerMessage::Error(e) => to_text(&Tagged { kind: "error", body: e }),
    }
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let kind = v
        .as_object_mut()
        .and_then(|o| o.remove("type"))
        .and_then(|t| t.as_str().map(str::to_string))
        .ok_or_else(|| malformed("missing `type`"))?;
    let err = |e: serde_json::Error| malformed(e.to_string());
    Ok(match kind.as_str() {
        "hello" => ServerMessage::Hello(serde_json::from_value(v).map_err(err)?),
        "telemetry" => ServerMessage::Telemetry(Box::new(serde_json::from_value(v).map_err(err)?)),
        "error" => ServerMessage::Error(serde_json::from_value(v).map_err(err)?),
        other => return Err(malformed(format!("unknown message type `{other}`"))),
    })
}

pub fn decode_telemetry(text: &str) -> Result<TelemetryFrame, ProtocolError> {
    match decode_server(text)? {
        ServerMessage::Telemetry(f) => Ok(*f),
        _ => Err(malformed("not a telemetry frame")),
    }
}
