//! Teleoperation service: a WebSocket endpoint that feeds operator commands into
//! the simulated rover's locomotion manager and streams telemetry back.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{
    decode_command, decode_server, decode_telemetry, encode_command, encode_server, encode_telemetry, ClientCommand,
    ClientMessage, ErrorFrame, Hello, ProtocolError, ServerMessage,
};
pub use server::{start, ServerConfig};
pub use session::{Session, SessionError, SessionEvent, Watchdog};
