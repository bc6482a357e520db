use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use emrs_core::sim::Scenario;
use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::sync::{broadcast, mpsc, watch};
use tokio::time::{Instant, MissedTickBehavior};
use tower_http::services::ServeDir;

use crate::protocol::{decode_command, encode_server, encode_telemetry, ClientMessage, ErrorFrame, Hello, ServerMessage};
use crate::session::{Session, SessionError, SessionEvent};

/// Largest backlog the stepper will catch up on before re-anchoring to the wall clock.
const MAX_CATCH_UP_S: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub library: BTreeMap<String, Scenario>,
    pub scenario: String,
    pub seed: u64,
    /// Directory with the console bundle, served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Stepper wake-up interval.
    pub tick: Duration,
}

impl ServerConfig {
    pub fn new(library: BTreeMap<String, Scenario>, scenario: &str, seed: u64) -> Self {
        Self {
            library,
            scenario: scenario.to_string(),
            seed,
            static_dir: None,
            tick: Duration::from_millis(10),
        }
    }
}

enum Inbound {
    Command {
        client: u64,
        msg: ClientMessage,
        reply: mpsc::UnboundedSender<String>,
    },
    Disconnect(u64),
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::UnboundedSender<Inbound>,
    telemetry: broadcast::Sender<Arc<str>>,
    scenario: watch::Receiver<String>,
    scenarios: Arc<Vec<String>>,
    seed: u64,
    next_client: Arc<AtomicU64>,
    clients: Arc<AtomicUsize>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
    scenario: String,
    scenarios: Vec<String>,
    seed: u64,
    clients: usize,
}

const PLACEHOLDER: &str = "<!doctype html><html><head><meta charset=\"utf-8\"><title>EMRS teleoperation</title></head>\
<body><h1>EMRS teleoperation</h1><p>No console bundle is installed. Connect a client to <code>/ws</code>.</p></body></html>";

/// Builds the router and spawns the real-time stepper. Must be called inside a Tokio runtime.
pub fn start(config: ServerConfig) -> Result<Router, SessionError> {
    let session = Session::new(config.library.clone(), &config.scenario, config.seed)?;
    let (inbound, rx) = mpsc::unbounded_channel();
    let (telemetry, _) = broadcast::channel(64);
    let (scenario_tx, scenario) = watch::channel(session.scenario().to_string());
    let state = AppState {
        inbound,
        telemetry: telemetry.clone(),
        scenario,
        scenarios: Arc::new(session.scenarios()),
        seed: config.seed,
        next_client: Arc::new(AtomicU64::new(1)),
        clients: Arc::new(AtomicUsize::new(0)),
    };
    tokio::spawn(stepper(session, rx, telemetry, scenario_tx, config.tick));

    let router = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/healthz", get(healthz))
        .with_state(state);
    Ok(match config.static_dir.filter(|d| d.is_dir()) {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(PLACEHOLDER) })),
    })
}

async fn stepper(
    mut session: Session,
    mut rx: mpsc::UnboundedReceiver<Inbound>,
    telemetry: broadcast::Sender<Arc<str>>,
    scenario: watch::Sender<String>,
    tick: Duration,
) {
    let mut interval = tokio::time::interval(tick);
    interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut anchor = (Instant::now(), session.time_s());
    loop {
        interval.tick().await;
        loop {
            match rx.try_recv() {
                Ok(Inbound::Command { client, msg, reply }) => {
                    let seq = msg.seq;
                    if let Err(e) = session.handle(client, msg) {
                        let frame = ServerMessage::Error(ErrorFrame { message: e.to_string(), seq });
                        let _ = reply.send(encode_server(&frame));
                    }
                    if *scenario.borrow() != session.scenario() {
                        scenario.send_replace(session.scenario().to_string());
                    }
                }
                Ok(Inbound::Disconnect(client)) => session.forget_client(client),
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        let mut target = anchor.1 + anchor.0.elapsed().as_secs_f64();
        if target - session.time_s() > MAX_CATCH_UP_S {
            anchor = (Instant::now(), session.time_s());
            target = anchor.1;
        }
        for event in session.advance_to(target) {
            if let SessionEvent::Telemetry(frame) = event {
                let _ = telemetry.send(Arc::from(encode_telemetry(&frame)));
            }
        }
    }
}

async fn healthz(State(state): State<AppState>) -> impl IntoResponse {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        scenario: state.scenario.borrow().clone(),
        scenarios: state.scenarios.as_ref().clone(),
        seed: state.seed,
        clients: state.clients.load(Ordering::Relaxed),
    })
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

async fn client_session(socket: WebSocket, state: AppState) {
    let client = state.next_client.fetch_add(1, Ordering::Relaxed);
    state.clients.fetch_add(1, Ordering::Relaxed);
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let mut frames = state.telemetry.subscribe();

    let hello = ServerMessage::Hello(Hello {
        client_id: client,
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: state.scenario.borrow().clone(),
        scenarios: state.scenarios.as_ref().clone(),
    });
    let writer = tokio::spawn(async move {
        if sink.send(Message::text(encode_server(&hello))).await.is_err() {
            return;
        }
        loop {
            let text = tokio::select! {
                r = reply_rx.recv() => match r {
                    Some(t) => t,
                    None => return,
                },
                f = frames.recv() => match f {
                    Ok(t) => t.to_string(),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                },
            };
            if sink.send(Message::text(text)).await.is_err() {
                return;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match decode_command(text.as_str()) {
                Ok(msg) => {
                    let cmd = Inbound::Command { client, msg, reply: reply_tx.clone() };
                    if state.inbound.send(cmd).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = reply_tx.send(encode_server(&ServerMessage::Error(ErrorFrame {
                        message: e.to_string(),
                        seq: None,
                    })));
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = state.inbound.send(Inbound::Disconnect(client));
    state.clients.fetch_sub(1, Ordering::Relaxed);
    writer.abort();
}
