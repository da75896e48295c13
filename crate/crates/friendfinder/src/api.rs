//! HTTP and WebSocket routes.
//!
//! Requests against one map are served in arrival order; the protocol runs
//! on the blocking pool so the HTTP layer stays responsive.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pgc_core::abort::Abort;
use pgc_core::ot::OtProvider;
use pgc_core::protocol::{Hooks, ProtocolConfig, SessionOptions};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, RwLock};

use crate::engine::{MapChain, MapError, Observer, SetOutcome, MAX_USER};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub circuits: usize,
    pub max_cells: usize,
    pub timeout: Duration,
    pub dealer_ot: bool,
    /// Fault injection applied to every execution. Tests only.
    pub hooks: Hooks,
    /// Per-session transcript directories are created under this path.
    pub record_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            circuits: 5,
            max_cells: 256,
            timeout: Duration::from_secs(120),
            dealer_ot: false,
            hooks: Hooks::default(),
            record_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn protocol(&self) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::malicious(self.circuits);
        cfg.timeout = self.timeout;
        if self.dealer_ot {
            cfg.ot = OtProvider::trusted_dealer();
        }
        cfg
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Event {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub op: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

struct Broadcast(broadcast::Sender<Event>);

impl Observer for Broadcast {
    fn started(&mut self, op: &'static str) {
        let _ = self.0.send(Event {
            kind: "started",
            op,
            phase: None,
            cause: None,
        });
    }

    fn completed(&mut self, op: &'static str) {
        let _ = self.0.send(Event {
            kind: "completed",
            op,
            phase: Some(7),
            cause: None,
        });
    }

    fn aborted(&mut self, op: &'static str, abort: &Abort) {
        let _ = self.0.send(Event {
            kind: "aborted",
            op,
            phase: Some(abort.phase),
            cause: Some(abort.cause.slug().to_string()),
        });
    }
}

struct Ledger {
    chain: MapChain,
    /// Requests served, in service order.
    seq: u64,
}

struct MapSession {
    cells: usize,
    ledger: Arc<tokio::sync::Mutex<Ledger>>,
    events: broadcast::Sender<Event>,
    names: Mutex<HashMap<u8, String>>,
}

#[derive(Clone)]
pub struct AppState {
    cfg: Arc<ServiceConfig>,
    sessions: Arc<RwLock<HashMap<String, Arc<MapSession>>>>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        Self {
            cfg: Arc::new(cfg),
            sessions: Arc::default(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/set", post(set_cell))
        .route("/session/{id}/cell/{n}", get(get_cell))
        .route("/session/{id}/events", get(events))
        .with_state(state)
}

pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Engine(Abort),
    Internal(String),
}

impl From<MapError> for ApiError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::BadCell { .. } | MapError::BadUser | MapError::BadSize { .. } => {
                ApiError::BadRequest(e.to_string())
            }
            MapError::Aborted(a) => ApiError::Engine(a),
            MapError::Program(e) => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
            ApiError::Engine(a) => (
                StatusCode::BAD_GATEWAY,
                json!({
                    "error": a.to_string(),
                    "phase": a.phase,
                    "origin": a.origin.to_string(),
                    "cause": a.cause.slug(),
                }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
pub struct CreateRequest {
    pub cells: usize,
    /// Optional caller-chosen id; reusing a live id is a conflict.
    pub session: Option<String>,
}

#[derive(Deserialize)]
pub struct SetRequest {
    pub user: u32,
    pub cell: usize,
    pub name: Option<String>,
}

fn fresh_id() -> String {
    let v: u128 = rand::thread_rng().gen();
    format!("{v:032x}")
}

async fn lookup(state: &AppState, id: &str) -> Result<Arc<MapSession>, ApiError> {
    state
        .sessions
        .read()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
}

/// Runs `f` on the session's chain after every earlier request.
async fn serialized<T: Send + 'static>(
    s: &MapSession,
    f: impl FnOnce(&mut MapChain, &mut Broadcast) -> Result<T, MapError> + Send + 'static,
) -> Result<(T, u64), ApiError> {
    let mut guard = s.ledger.clone().lock_owned().await;
    let mut obs = Broadcast(s.events.clone());
    tokio::task::spawn_blocking(move || {
        guard.seq += 1;
        let seq = guard.seq;
        f(&mut guard.chain, &mut obs).map(|v| (v, seq))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(ApiError::from)
}

async fn create_session(State(state): State<AppState>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    let max = state.cfg.max_cells;
    if req.cells == 0 || req.cells > max {
        return Err(MapError::BadSize { max }.into());
    }
    let id = req.session.unwrap_or_else(fresh_id);
    if id.is_empty() || id.len() > 64 || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ApiError::BadRequest(
            "session ids use 1 to 64 characters from [A-Za-z0-9_-]".into(),
        ));
    }
    let session = {
        let mut sessions = state.sessions.write().await;
        if sessions.contains_key(&id) {
            return Err(ApiError::Conflict(format!("session `{id}` already started")));
        }
        let record_dir = match &state.cfg.record_dir {
            Some(d) => {
                let d = d.join(&id);
                std::fs::create_dir_all(&d).map_err(|e| ApiError::Internal(e.to_string()))?;
                Some(d)
            }
            None => None,
        };
        let chain = MapChain::new(
            req.cells,
            state.cfg.protocol(),
            SessionOptions {
                hooks: state.cfg.hooks.clone(),
                record_dir,
                ..Default::default()
            },
        );
        let s = Arc::new(MapSession {
            cells: req.cells,
            ledger: Arc::new(tokio::sync::Mutex::new(Ledger { chain, seq: 0 })),
            events: broadcast::channel(256).0,
            names: Mutex::default(),
        });
        sessions.insert(id.clone(), s.clone());
        s
    };
    match serialized(&session, |chain, obs| chain.start(obs)).await {
        Ok(_) => Ok((StatusCode::CREATED, Json(json!({ "session": id, "cells": req.cells }))).into_response()),
        Err(e) => {
            state.sessions.write().await.remove(&id);
            Err(e)
        }
    }
}

async fn set_cell(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SetRequest>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let s = lookup(&state, &id).await?;
    let user = match u8::try_from(req.user) {
        Ok(u) if (1..=MAX_USER).contains(&u) => u,
        _ => return Err(MapError::BadUser.into()),
    };
    if req.cell >= s.cells {
        return Err(MapError::BadCell {
            cell: req.cell,
            cells: s.cells,
        }
        .into());
    }
    if let Some(name) = req.name {
        s.names.lock().unwrap().insert(user, name);
    }
    let cell = req.cell;
    let (outcome, seq) = serialized(&s, move |chain, obs| chain.set(user, cell, obs)).await?;
    Ok(Json(match outcome {
        SetOutcome::Moved => json!({ "result": "moved", "seq": seq }),
        SetOutcome::Occupied(by) => {
            let name = s.names.lock().unwrap().get(&by).cloned();
            json!({ "result": "occupied", "occupied_by": by, "occupied_by_name": name, "seq": seq })
        }
    }))
}

async fn get_cell(
    State(state): State<AppState>,
    Path((id, n)): Path<(String, usize)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let s = lookup(&state, &id).await?;
    if n >= s.cells {
        return Err(MapError::BadCell {
            cell: n,
            cells: s.cells,
        }
        .into());
    }
    let (value, seq) = serialized(&s, move |chain, obs| chain.get(n, obs)).await?;
    Ok(Json(json!({ "value": value, "seq": seq })))
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let s = lookup(&state, &id).await?;
    let rx = s.events.subscribe();
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<Event>) {
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(ev) => {
                    let text = serde_json::to_string(&ev).expect("event serializes");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                _ => {}
            },
        }
    }
}
