//! Live paired-guidebook sessions over WebSocket.
//!
//! Each session id names one pair of guidebooks (slots `A` and `B`). A client
//! binds to a slot with `join`, then sends gestures; the session pushes the
//! device's audible-state change points back. Every gesture is logged with its
//! session time, and `GET /sessions/<id>/recording` returns the log as a
//! scenario that replays offline.

pub mod frames;
mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use sottovoce_core::harness::Scenario;
use sottovoce_core::simnet::NetworkConfigError;
use sottovoce_core::{Catalog, GuidebookConfig, NetworkConfig, ProtocolConfig};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tower_http::services::ServeDir;

pub use frames::{Ack, ClientCommand, ServerFrame, Slot, TapAck};
use session::SessionCmd;

pub const DEFAULT_PORT: u16 = 8089;
pub const DEFAULT_TICK_MS: u64 = 50;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Network(#[from] NetworkConfigError),
    #[error("tick_ms must be positive")]
    Tick,
    #[error("invalid protocol or guidebook settings")]
    Engine,
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub catalog: Arc<Catalog>,
    /// Written into recordings so they resolve to the same catalog offline.
    pub catalog_ref: String,
    pub network: NetworkConfig,
    pub protocol: ProtocolConfig,
    pub guidebook: GuidebookConfig,
    pub tick_ms: u64,
    /// Served under `/` when set (the browser client).
    pub static_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(catalog: Catalog, catalog_ref: impl Into<String>) -> Self {
        Self {
            catalog: Arc::new(catalog),
            catalog_ref: catalog_ref.into(),
            network: NetworkConfig::default(),
            protocol: ProtocolConfig::default(),
            guidebook: GuidebookConfig::default(),
            tick_ms: DEFAULT_TICK_MS,
            static_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.network.validate()?;
        if self.tick_ms == 0 {
            return Err(ConfigError::Tick);
        }
        if !self.protocol.is_valid() || !self.guidebook.is_valid() {
            return Err(ConfigError::Engine);
        }
        Ok(())
    }
}

struct Shared {
    config: Arc<ServerConfig>,
    sessions: Mutex<HashMap<String, mpsc::UnboundedSender<SessionCmd>>>,
    next_conn: AtomicU64,
}

#[derive(Clone)]
pub struct Server {
    shared: Arc<Shared>,
}

impl Server {
    pub fn new(config: ServerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self { shared: Arc::new(Shared { config: Arc::new(config), sessions: Mutex::default(), next_conn: AtomicU64::new(1) }) })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    pub fn router(&self) -> Router {
        let router = Router::new()
            .route("/healthz", get(|| async { "ok" }))
            .route("/ws", get(ws_upgrade))
            .route("/sessions/{id}/recording", get(recording))
            .with_state(self.clone());
        match &self.shared.config.static_dir {
            Some(dir) => router.fallback_service(ServeDir::new(dir)),
            None => router,
        }
    }

    pub async fn serve(self, listener: TcpListener) -> std::io::Result<()> {
        axum::serve(listener, self.router()).await
    }

    /// Spawns the session on first use.
    fn session(&self, id: &str) -> mpsc::UnboundedSender<SessionCmd> {
        let mut sessions = self.shared.sessions.lock().expect("session map poisoned");
        sessions
            .entry(id.to_owned())
            .or_insert_with(|| {
                let (tx, rx) = mpsc::unbounded_channel();
                tracing::info!(session = id, "session created");
                tokio::spawn(session::run(id.to_owned(), self.shared.config.clone(), rx));
                tx
            })
            .clone()
    }

    /// The command log of a session as a replayable scenario.
    pub async fn recording(&self, id: &str) -> Option<Scenario> {
        let tx = self.shared.sessions.lock().expect("session map poisoned").get(id).cloned()?;
        let (reply, rx) = oneshot::channel();
        tx.send(SessionCmd::Recording { reply }).ok()?;
        rx.await.ok()
    }
}

async fn recording(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.recording(&id).await {
        Some(scenario) => Json(scenario).into_response(),
        None => (StatusCode::NOT_FOUND, format!("no session {id}")).into_response(),
    }
}

async fn ws_upgrade(State(server): State<Server>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| client(server, socket))
}

fn parse(text: &str) -> Result<ClientCommand, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed command: {e}"))
}

async fn client(server: Server, mut socket: WebSocket) {
    let conn = server.shared.next_conn.fetch_add(1, Ordering::Relaxed);
    let send = |frame: ServerFrame| Message::Text(frame.to_text().into());

    // unbound until a successful join
    let (session, slot, mut outbox_rx) = loop {
        let text = match socket.recv().await {
            Some(Ok(Message::Text(text))) => text,
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
            Some(Ok(_)) => continue,
        };
        let reason = match parse(&text) {
            Ok(ClientCommand::Join { session, slot }) => {
                let tx = server.session(&session);
                let (outbox, outbox_rx) = mpsc::unbounded_channel();
                let (reply, joined) = oneshot::channel();
                if tx.send(SessionCmd::Join { slot, conn, outbox, reply }).is_err() {
                    "session unavailable".to_owned()
                } else {
                    match joined.await {
                        Ok(Ok(())) => break (tx, slot, outbox_rx),
                        Ok(Err(reason)) => reason,
                        Err(_) => "session unavailable".to_owned(),
                    }
                }
            }
            Ok(_) => "unbound slot: join first".to_owned(),
            Err(reason) => reason,
        };
        if socket.send(send(ServerFrame::error(reason))).await.is_err() {
            return;
        }
    };

    loop {
        tokio::select! {
            frame = outbox_rx.recv() => match frame {
                Some(frame) => {
                    if socket.send(send(frame)).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => match parse(&text) {
                    Ok(cmd) => {
                        if session.send(SessionCmd::Command { slot, conn, cmd }).is_err() {
                            break;
                        }
                    }
                    Err(reason) => {
                        if socket.send(send(ServerFrame::error(reason))).await.is_err() {
                            break;
                        }
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = session.send(SessionCmd::Leave { slot, conn });
}
