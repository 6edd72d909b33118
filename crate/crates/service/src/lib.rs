//! HTTP/JSON adapter over the conversation engine and the file store.
//!
//! Requests for one session are serialized by a per-session lock; requests
//! for different sessions run concurrently. Every mutation is written to the
//! store before the response is sent.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use convex_core::dialogue::Engine;
use convex_core::executor::Artifact;
use convex_core::intent::Rating;
use convex_core::metrics::MetricsReport;
use convex_core::session::{Pending, Session, SessionSnapshot, SessionStatus, Survey, Turn};
use convex_core::session_store::SessionStore;
use convex_core::tabular::SheetSelection;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::Mutex as AsyncMutex;
use uuid::Uuid;

pub use error::{ApiError, ErrorBody};

pub const API_VERSION: &str = "1";
pub const OPENAPI: &str = include_str!("../openapi.json");
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

type SessionSlot = Arc<AsyncMutex<Option<Session>>>;

struct Inner {
    engine: Engine,
    store: SessionStore,
    sessions: Mutex<HashMap<Uuid, SessionSlot>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Wraps an engine and a store, loading the stored profiles and history.
    pub fn new(engine: Engine, store: SessionStore) -> Result<Self, ServiceError> {
        engine.set_knowledge(store.load_knowledge()?);
        Ok(AppState {
            inner: Arc::new(Inner {
                engine,
                store,
                sessions: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.inner.engine
    }

    pub fn store(&self) -> &SessionStore {
        &self.inner.store
    }

    fn slot(&self, id: Uuid) -> SessionSlot {
        let mut map = self.inner.sessions.lock().expect("session map lock");
        map.entry(id).or_default().clone()
    }

    /// Runs `f` on a session under its lock, off the async workers. With
    /// `persist`, the session and the shared knowledge are saved afterwards.
    async fn with_session<T, F>(&self, id: Uuid, persist: bool, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Engine, &SessionStore, &mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        let mut guard = self.slot(id).lock_owned().await;
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let inner = &state.inner;
            if guard.is_none() {
                *guard = Some(inner.store.load_session(id)?);
            }
            let session = guard.as_mut().expect("loaded above");
            let result = f(&inner.engine, &inner.store, session);
            if persist {
                inner.store.save_session(session)?;
                inner.store.save_knowledge(&inner.engine.knowledge())?;
            }
            result
        })
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] convex_core::session_store::StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server stopped: {0}")]
    Serve(std::io::Error),
}

// ---------------------------------------------------------------- wire types

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub user_id: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: Uuid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnsReply {
    pub session_id: Uuid,
    pub status: SessionStatus,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetReply {
    pub report: Value,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub turn_index: usize,
    pub rating: Rating,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackReply {
    pub turn_index: usize,
    pub rating: Rating,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusReply {
    pub session_id: Uuid,
    pub status: SessionStatus,
}

/// A session transcript with its artifact index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub api_version: String,
    pub session_id: Uuid,
    pub user_id: String,
    pub status: SessionStatus,
    pub turns: Vec<Turn>,
    pub pending: Option<Pending>,
    pub artifacts: Vec<Artifact>,
    pub story: Option<String>,
    pub warnings: Vec<String>,
    pub survey: Option<Survey>,
}

impl SessionView {
    fn of(s: &Session) -> Self {
        SessionView {
            api_version: API_VERSION.into(),
            session_id: s.id,
            user_id: s.user_id.clone(),
            status: s.status,
            turns: s.turns.clone(),
            pending: s.pending.clone(),
            artifacts: s.workspace.artifacts.clone(),
            story: s.story.clone(),
            warnings: s.warnings.clone(),
            survey: s.survey.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct DatasetQuery {
    pub filename: Option<String>,
    /// `all`, `first`, or comma-separated sheet names.
    pub sheets: Option<String>,
}

fn parse_sheets(spec: &str) -> SheetSelection {
    match spec.trim().to_lowercase().as_str() {
        "all" => SheetSelection::All,
        "first" => SheetSelection::First,
        _ => SheetSelection::Names(
            spec.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        ),
    }
}

/// Decodes an optional JSON body; an empty body means the defaults.
fn parse_optional<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn parse_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "session_not_found",
            format!("no session `{raw}`"),
        )
    })
}

// ---------------------------------------------------------------- handlers

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_optional(&body)?;
    let user = req.user_id.unwrap_or_else(|| "anonymous".into());
    let seed = req.seed.unwrap_or(0);
    let session = state.engine().new_session(&user, seed);
    let id = session.id;
    let slot = state.slot(id);
    let mut guard = slot.lock_owned().await;
    let store = state.store().clone();
    let session = tokio::task::spawn_blocking(move || store.save_session(&session).map(|_| session))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    *guard = Some(session);
    Ok((StatusCode::CREATED, Json(Created { session_id: id })).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let id = parse_id(&id)?;
    state
        .with_session(id, false, |_, _, s| Ok(Json(SessionView::of(s))))
        .await
}

/// Writes a snapshot when a turn paused the session.
fn snapshot_if_paused(engine: &Engine, store: &SessionStore, s: &Session) -> Result<(), ApiError> {
    if s.status == SessionStatus::Paused {
        store.save_snapshot(&SessionSnapshot::capture(s, engine.clock().now()))?;
    }
    Ok(())
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnsReply>, ApiError> {
    let id = parse_id(&id)?;
    let req: MessageRequest = parse_required(&body)?;
    state
        .with_session(id, true, move |engine, store, s| {
            let turns = engine.handle_turn(s, &req.text)?;
            snapshot_if_paused(engine, store, s)?;
            Ok(Json(TurnsReply {
                session_id: s.id,
                status: s.status,
                turns,
            }))
        })
        .await
}

async fn post_dataset(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DatasetQuery>,
    body: Bytes,
) -> Result<Json<DatasetReply>, ApiError> {
    let id = parse_id(&id)?;
    let filename = q
        .filename
        .filter(|f| !f.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("the `filename` query parameter is required"))?;
    let selection = q.sheets.as_deref().map(parse_sheets);
    state
        .with_session(id, true, move |engine, _, s| {
            let reply = engine.upload(s, &body, &filename, selection)?;
            Ok(Json(DatasetReply {
                report: reply.report,
                turns: reply.turns,
            }))
        })
        .await
}

async fn post_feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<FeedbackReply>, ApiError> {
    let id = parse_id(&id)?;
    let req: FeedbackRequest = parse_required(&body)?;
    state
        .with_session(id, true, move |engine, _, s| {
            let warning = engine.record_feedback(s, req.turn_index, req.rating)?;
            Ok(Json(FeedbackReply {
                turn_index: req.turn_index,
                rating: req.rating,
                warning,
            }))
        })
        .await
}

async fn post_pause(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StatusReply>, ApiError> {
    let id = parse_id(&id)?;
    state
        .with_session(id, true, |engine, store, s| {
            let snapshot = engine.pause(s)?;
            store.save_snapshot(&snapshot)?;
            Ok(Json(StatusReply {
                session_id: s.id,
                status: s.status,
            }))
        })
        .await
}

async fn post_resume(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StatusReply>, ApiError> {
    let id = parse_id(&id)?;
    state
        .with_session(id, true, |engine, _, s| {
            engine.resume(s)?;
            Ok(Json(StatusReply {
                session_id: s.id,
                status: s.status,
            }))
        })
        .await
}

async fn post_survey(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Survey>, ApiError> {
    let id = parse_id(&id)?;
    let survey: Survey = parse_required(&body)?;
    state
        .with_session(id, true, move |engine, _, s| {
            engine.record_survey(s, survey.clone())?;
            Ok(Json(survey))
        })
        .await
}

fn bytes_response(media_type: &str, bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, media_type.to_string())], bytes).into_response()
}

async fn get_artifact(
    State(state): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    state
        .with_session(id, false, move |_, _, s| {
            let not_found = || {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "artifact_not_found",
                    format!("no artifact `{aid}` in this session"),
                )
            };
            let artifact = s.workspace.artifact(&aid).ok_or_else(not_found)?;
            let bytes = s.workspace.payload(&aid).ok_or_else(not_found)?.to_vec();
            Ok(bytes_response(&artifact.media_type, bytes))
        })
        .await
}

/// The story, generated on first request while the session can still end.
async fn get_story(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let generated = state
        .with_session(id, false, |engine, store, s| {
            if s.story.is_some() {
                return Ok(false);
            }
            if s.status.is_terminated() {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "story_unavailable",
                    "the session ended without a story",
                ));
            }
            engine.end_session(s)?;
            store.save_session(s)?;
            store.save_knowledge(&engine.knowledge())?;
            Ok(true)
        })
        .await?;
    tracing::debug!(%id, generated, "story requested");
    state
        .with_session(id, false, |_, _, s| {
            let story = s.story.as_deref().expect("present");
            let artifact = s.workspace.artifact(story).expect("story artifact");
            let bytes = s.workspace.payload(story).expect("story payload").to_vec();
            Ok(bytes_response(&artifact.media_type, bytes))
        })
        .await
}

async fn get_metrics(State(state): State<AppState>) -> Result<Json<MetricsReport>, ApiError> {
    let store = state.store().clone();
    let versions = state.engine().versions();
    let sessions = tokio::task::spawn_blocking(move || store.load_all())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(MetricsReport::from_sessions(&sessions, &versions)))
}

async fn get_openapi() -> Response {
    bytes_response("application/json", OPENAPI.as_bytes().to_vec())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/dataset",
            post(post_dataset).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)),
        )
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/feedback", post(post_feedback))
        .route("/sessions/{id}/pause", post(post_pause))
        .route("/sessions/{id}/resume", post(post_resume))
        .route("/sessions/{id}/survey", post(post_survey))
        .route("/sessions/{id}/artifacts/{aid}", get(get_artifact))
        .route("/sessions/{id}/story", get(get_story))
        .route("/metrics", get(get_metrics))
        .route("/openapi.json", get(get_openapi))
        .fallback(fallback)
        .with_state(state)
}

/// Binds a listener, reporting the address on failure.
pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, state: AppState) -> Result<(), ServiceError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
