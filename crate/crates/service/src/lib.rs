//! HTTP front end for the tagger and the practice dialogs.
//!
//! ```text
//! GET  /api/health                 model status and scenarios
//! POST /api/nlu                    {text} -> intent, distribution, per-token labels
//! POST /api/session                {scenario, seed?} -> session id and greeting
//! POST /api/session/{id}/turn      {text} -> response, action, nlu, state, ended
//! GET  /api/session/{id}/tips      suggested utterances
//! ```
//!
//! Every body, errors included, carries `schema_version`.

mod config;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use slu_core::dst::{Dialog, DstError, NluResult, Resources};
use slu_core::model::{load_checkpoint, JointModel, ModelError};
use thiserror::Error;

pub use config::{BusyPolicy, DialogNlu, ServiceConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dialog(#[from] DstError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Error reply: status plus message.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, r.body_text())
    }
}

impl From<DstError> for ApiError {
    fn from(e: DstError) -> Self {
        match e {
            DstError::UnknownScenario(_) => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;
/// Produces a fresh session id.
pub type IdSource = Arc<dyn Fn() -> String + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0))
}

/// Ids from the start time and a counter: `<hex millis>-<n>`.
pub fn counter_ids(clock: &Clock) -> IdSource {
    let start = clock();
    let n = AtomicU64::new(0);
    Arc::new(move || format!("{start:x}-{}", n.fetch_add(1, Ordering::Relaxed)))
}

struct Session {
    dialog: Dialog,
}

pub struct AppState {
    model: Option<JointModel>,
    resources: Resources,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    clock: Clock,
    ids: IdSource,
    transcript: Option<Mutex<File>>,
}

impl AppState {
    pub fn new(
        config: ServiceConfig,
        model: Option<JointModel>,
        resources: Resources,
        clock: Clock,
        ids: IdSource,
    ) -> Result<Self, ServiceError> {
        let transcript = match &config.transcript {
            Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
            None => None,
        };
        Ok(AppState { model, resources, config, sessions: Mutex::new(HashMap::new()), clock, ids, transcript })
    }

    /// Loads the model named in `config` (if any) and the data directory.
    pub fn from_config(config: ServiceConfig) -> Result<Self, ServiceError> {
        let model = config.model.as_ref().map(load_checkpoint).transpose()?;
        let resources = Resources::load(&config.data_dir)?;
        let clock = system_clock();
        let ids = counter_ids(&clock);
        Self::new(config, model, resources, clock, ids)
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
    }

    fn log_turn(&self, record: &serde_json::Value) {
        if let Some(f) = &self.transcript {
            let mut f = f.lock().unwrap();
            // a failing transcript log must not fail the turn
            let _ = writeln!(f, "{record}");
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/nlu", post(nlu))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/turn", post(turn))
        .route("/api/session/{id}/tips", get(tips))
        .with_state(state)
}

/// Binds `host:port` from the configuration and serves until the process stops.
pub async fn serve(state: AppState) -> Result<(), ServiceError> {
    let addr = format!("{}:{}", state.config.host, state.config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}

#[derive(Serialize)]
struct HealthReply {
    schema_version: u32,
    model_loaded: bool,
    scenarios: Vec<String>,
}

async fn health(State(app): State<Arc<AppState>>) -> Json<HealthReply> {
    Json(HealthReply {
        schema_version: SCHEMA_VERSION,
        model_loaded: app.model.is_some(),
        scenarios: app.resources.scenarios().map(str::to_string).collect(),
    })
}

#[derive(Deserialize)]
struct TextRequest {
    text: String,
}

#[derive(Serialize)]
struct NluReply {
    schema_version: u32,
    intent: String,
    /// `[intent, probability]` for every intent, in vocabulary order.
    intent_probs: Vec<(String, f64)>,
    /// `[token, label]` per token.
    slots: Vec<(String, String)>,
}

async fn nlu(State(app): State<Arc<AppState>>, body: Result<Json<TextRequest>, JsonRejection>) -> ApiResult<NluReply> {
    let Json(req) = body?;
    let model = app
        .model
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model is loaded"))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text is empty"));
    }
    let p = model
        .predict_text(&req.text)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let intents = model.vocabs().intents.entries();
    Ok(Json(NluReply {
        schema_version: SCHEMA_VERSION,
        intent: p.intent,
        intent_probs: intents.iter().cloned().zip(p.intent_probs).collect(),
        slots: p.tokens.into_iter().zip(p.slots).collect(),
    }))
}

#[derive(Deserialize)]
struct SessionRequest {
    scenario: String,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct SessionReply {
    schema_version: u32,
    session_id: String,
    scenario: String,
    greeting: String,
    created_at: u64,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> ApiResult<SessionReply> {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or(app.config.seed);
    let (dialog, greeting) = Dialog::start(&app.resources, &req.scenario, seed)?;
    let id = (app.ids)();
    let created_at = (app.clock)();
    let session = Arc::new(tokio::sync::Mutex::new(Session { dialog }));
    app.sessions.lock().unwrap().insert(id.clone(), session);
    Ok(Json(SessionReply {
        schema_version: SCHEMA_VERSION,
        session_id: id,
        scenario: req.scenario,
        greeting,
        created_at,
    }))
}

#[derive(Serialize)]
struct NluSummary {
    intent: String,
    slots: Vec<(String, String)>,
}

#[derive(Serialize)]
struct TurnReply {
    schema_version: u32,
    turn: usize,
    response: String,
    action: String,
    nlu: NluSummary,
    state: serde_json::Value,
    ended: bool,
}

fn understand(app: &AppState, dialog: &Dialog, text: &str) -> Result<NluResult, ApiError> {
    let scenario = &dialog.state().scenario;
    match (&app.model, app.config.dialog_nlu) {
        (Some(model), DialogNlu::Model) => {
            let p = model
                .predict_text(text)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
            Ok(app.resources.intent_map.from_prediction(&p))
        }
        _ => Ok(app.resources.rules.understand(text, app.resources.catalog(scenario)?)),
    }
}

async fn turn(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<TextRequest>, JsonRejection>,
) -> ApiResult<TurnReply> {
    let Json(req) = body?;
    let session = app.session(&id)?;
    let mut s = match app.config.busy {
        BusyPolicy::Serialize => session.lock().await,
        BusyPolicy::Reject => session
            .try_lock()
            .map_err(|_| ApiError::new(StatusCode::CONFLICT, "another turn is in progress"))?,
    };
    if !s.dialog.is_active() {
        return Err(ApiError::new(StatusCode::GONE, "the session has ended"));
    }
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text is empty"));
    }
    let nlu = understand(&app, &s.dialog, &req.text)?;
    let t = s.dialog.turn(&app.resources, &req.text, nlu)?;
    let state = s.dialog.state();
    let reply = TurnReply {
        schema_version: SCHEMA_VERSION,
        turn: state.turn,
        response: t.response,
        action: t.action.to_string(),
        nlu: NluSummary { intent: t.nlu.intent.to_string(), slots: t.nlu.chunks },
        state: json!({ "rs": state.request, "is": state.inform, "ds": state.deny }),
        ended: !state.active,
    };
    app.log_turn(&json!({
        "ts": (app.clock)(),
        "session": id,
        "text": req.text,
        "intent": reply.nlu.intent,
        "slots": reply.nlu.slots,
        "action": reply.action,
        "response": reply.response,
    }));
    Ok(Json(reply))
}

#[derive(Serialize)]
struct TipsReply {
    schema_version: u32,
    tips: Vec<String>,
}

async fn tips(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<TipsReply> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    if !s.dialog.is_active() {
        return Err(ApiError::new(StatusCode::GONE, "the session has ended"));
    }
    Ok(Json(TipsReply { schema_version: SCHEMA_VERSION, tips: s.dialog.tips(&app.resources) }))
}
