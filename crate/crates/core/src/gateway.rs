//! Local HTTP session service.
//!
//! The gateway owns one model per order and any number of independent typing
//! sessions. It does no timing of its own beyond a fallback clock: clients
//! detect dwell and send each selection with their own timestamp.
//!
//! Endpoints (JSON bodies):
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session |
//! | GET | `/sessions/{id}` | current state |
//! | POST | `/sessions/{id}/command` | apply one command |
//! | GET | `/sessions/{id}/metrics` | live metrics |
//! | DELETE | `/sessions/{id}` | end, persist transcript |
//! | GET | `/healthz` | liveness and loaded orders |
//!
//! Errors are `{"error": code, "message": text}`.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::layout::{CommandId, Layout, Level};
use crate::metrics::{report_from_log, MetricsError, MetricsReport, M_COMMANDS, M_LETTERS};
use crate::ppm::PredModel;
use crate::session::{write_transcript, SessionError, TranscriptLine, TypingSession};

pub const DEFAULT_DWELL_MS: u64 = 1500;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no model loaded for order {0}")]
    UnknownOrder(i64),
    #[error("target contains {0:?}, which is not in the character set")]
    MalformedTarget(char),
    #[error("no session with id {0:?}")]
    UnknownSession(String),
    #[error("command id {0} is outside 1..=10")]
    BadCommandId(i64),
    #[error("{0}")]
    BadRequest(String),
    #[error("event time {t_ms} ms precedes the previous event at {last_ms} ms")]
    TimeWentBackwards { t_ms: u64, last_ms: u64 },
    #[error("{0}")]
    Internal(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownOrder(_) => "unknown_order",
            GatewayError::MalformedTarget(_) => "malformed_target",
            GatewayError::UnknownSession(_) => "unknown_session",
            GatewayError::BadCommandId(_) => "bad_command_id",
            GatewayError::BadRequest(_) => "bad_request",
            GatewayError::TimeWentBackwards { .. } => "time_went_backwards",
            GatewayError::Internal(_) => "internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            GatewayError::UnknownSession(_) => StatusCode::NOT_FOUND,
            GatewayError::TimeWentBackwards { .. } => StatusCode::CONFLICT,
            GatewayError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}

impl From<SessionError> for GatewayError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::TargetNotNormalized(c) => GatewayError::MalformedTarget(c),
            SessionError::TimeWentBackwards { t_ms, last_ms } => {
                GatewayError::TimeWentBackwards { t_ms, last_ms }
            }
            other => GatewayError::Internal(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSessionRequest {
    pub order: i64,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub dwell_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CommandRequest {
    pub command_id: i64,
    /// Client timestamp, ms since session start. Defaults to server elapsed time.
    #[serde(default)]
    pub t_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionConfig {
    pub order: usize,
    pub dwell_ms: u64,
    pub charset_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub created_at_ms: u64,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    #[serde(flatten)]
    pub report: MetricsReport,
    /// True when the session has nothing measurable yet and zeros are shown.
    pub empty: bool,
}

impl MetricsSnapshot {
    fn of(session: &TypingSession) -> Self {
        match report_from_log(session.events(), M_COMMANDS, M_LETTERS) {
            Ok(report) => Self { report, empty: false },
            Err(MetricsError::EmptyLog | MetricsError::ZeroDuration | MetricsError::DegenerateAlphabet) => Self {
                report: MetricsReport::zero(),
                empty: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreateSessionResponse {
    #[serde(flatten)]
    pub handle: SessionHandle,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub handle: SessionHandle,
    pub level: Level,
    pub layout: Layout,
    pub text_entered: String,
    pub last_five: String,
    pub complete: bool,
    pub event_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandResponse {
    pub event: TranscriptLine,
    pub level: Level,
    pub layout: Layout,
    pub text_entered: String,
    pub last_five: String,
    pub complete: bool,
    pub metrics_snapshot: MetricsSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndSessionResponse {
    pub session_id: String,
    pub text_entered: String,
    pub transcript: Vec<TranscriptLine>,
    pub metrics: MetricsSnapshot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub default_dwell_ms: u64,
    pub charset_id: String,
    /// Where ended sessions write `<session_id>.jsonl`. None disables persistence.
    pub transcript_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            default_dwell_ms: DEFAULT_DWELL_MS,
            charset_id: "default".into(),
            transcript_dir: None,
        }
    }
}

struct Entry {
    handle: SessionHandle,
    session: TypingSession,
    opened: Instant,
}

impl Entry {
    fn complete(&self) -> bool {
        self.session.is_complete().unwrap_or(false)
    }

    fn view(&self) -> SessionView {
        SessionView {
            handle: self.handle.clone(),
            level: self.session.level(),
            layout: self.session.layout().clone(),
            text_entered: self.session.text_entered().to_string(),
            last_five: self.session.last_five().to_string(),
            complete: self.complete(),
            event_count: self.session.events().len(),
        }
    }
}

/// Session registry. Every method is safe to call from many threads;
/// commands to one session are applied one at a time.
pub struct Gateway {
    models: BTreeMap<usize, Arc<PredModel>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    config: GatewayConfig,
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Gateway {
    pub fn new(models: impl IntoIterator<Item = PredModel>, config: GatewayConfig) -> Self {
        let models = models
            .into_iter()
            .map(|m| (m.order(), Arc::new(m)))
            .collect();
        Self {
            models,
            sessions: Mutex::new(HashMap::new()),
            config,
        }
    }

    pub fn orders(&self) -> Vec<usize> {
        self.models.keys().copied().collect()
    }

    pub fn model(&self, order: usize) -> Option<&Arc<PredModel>> {
        self.models.get(&order)
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, GatewayError> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, req: CreateSessionRequest) -> Result<CreateSessionResponse, GatewayError> {
        let model = usize::try_from(req.order)
            .ok()
            .and_then(|k| self.models.get(&k))
            .ok_or(GatewayError::UnknownOrder(req.order))?
            .clone();
        let created_at_ms = now_unix_ms();
        let session = TypingSession::new(model.clone(), req.target.clone(), created_at_ms)?;
        let handle = SessionHandle {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            created_at_ms,
            config: SessionConfig {
                order: model.order(),
                dwell_ms: req.dwell_ms.unwrap_or(self.config.default_dwell_ms),
                charset_id: self.config.charset_id.clone(),
                target: req.target,
            },
        };
        let response = CreateSessionResponse {
            handle: handle.clone(),
            layout: session.layout().clone(),
        };
        let entry = Entry {
            handle,
            session,
            opened: Instant::now(),
        };
        self.sessions
            .lock()
            .expect("session map poisoned")
            .insert(response.handle.session_id.clone(), Arc::new(Mutex::new(entry)));
        Ok(response)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, GatewayError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().expect("session poisoned");
        Ok(entry.view())
    }

    pub fn post_command(&self, id: &str, req: CommandRequest) -> Result<CommandResponse, GatewayError> {
        let command = u8::try_from(req.command_id)
            .ok()
            .and_then(|c| CommandId::new(c).ok())
            .ok_or(GatewayError::BadCommandId(req.command_id))?;
        let entry = self.entry(id)?;
        let mut entry = entry.lock().expect("session poisoned");
        let t_ms = req
            .t_ms
            .unwrap_or_else(|| (entry.opened.elapsed().as_millis() as u64).max(entry.session.last_event_ms()));
        let event = entry.session.apply_command(command, t_ms)?;
        let s = &entry.session;
        Ok(CommandResponse {
            event: TranscriptLine::from(&event),
            level: s.level(),
            layout: s.layout().clone(),
            text_entered: s.text_entered().to_string(),
            last_five: s.last_five().to_string(),
            complete: entry.complete(),
            metrics_snapshot: MetricsSnapshot::of(s),
        })
    }

    pub fn get_metrics(&self, id: &str) -> Result<MetricsSnapshot, GatewayError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().expect("session poisoned");
        Ok(MetricsSnapshot::of(&entry.session))
    }

    /// Removes the session and returns its transcript, writing it to the
    /// transcript directory when one is configured.
    pub fn end_session(&self, id: &str) -> Result<EndSessionResponse, GatewayError> {
        let entry = self
            .sessions
            .lock()
            .expect("session map poisoned")
            .remove(id)
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))?;
        let entry = entry.lock().expect("session poisoned");
        let events = entry.session.events();
        let transcript_path = match &self.config.transcript_dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                let write = || -> std::io::Result<()> {
                    std::fs::create_dir_all(dir)?;
                    let file = std::fs::File::create(&path)?;
                    write_transcript(std::io::BufWriter::new(file), events)
                };
                write().map_err(|e| GatewayError::Internal(format!("writing transcript: {e}")))?;
                Some(path.display().to_string())
            }
            None => None,
        };
        Ok(EndSessionResponse {
            session_id: id.to_string(),
            text_entered: entry.session.text_entered().to_string(),
            transcript: events.iter().map(TranscriptLine::from).collect(),
            metrics: MetricsSnapshot::of(&entry.session),
            transcript_path,
        })
    }
}

type Shared = Arc<Gateway>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, GatewayError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| GatewayError::BadRequest(e.body_text()))
}

async fn create_handler(
    State(gw): State<Shared>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), GatewayError> {
    let created = gw.create_session(body(payload)?)?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, GatewayError> {
    gw.get_session(&id).map(Json)
}

async fn command_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<CommandRequest>, JsonRejection>,
) -> Result<Json<CommandResponse>, GatewayError> {
    gw.post_command(&id, body(payload)?).map(Json)
}

async fn metrics_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<MetricsSnapshot>, GatewayError> {
    gw.get_metrics(&id).map(Json)
}

async fn end_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<EndSessionResponse>, GatewayError> {
    gw.end_session(&id).map(Json)
}

async fn health_handler(State(gw): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "orders": gw.orders() }))
}

/// HTTP routes for `gateway`, optionally serving static files from `static_dir`.
pub fn router(gateway: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}", get(get_handler).delete(end_handler))
        .route("/sessions/{id}/command", post(command_handler))
        .route("/sessions/{id}/metrics", get(metrics_handler))
        .route("/healthz", get(health_handler))
        .with_state(gateway);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub async fn serve(gateway: Shared, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(gateway, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
