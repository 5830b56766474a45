//! JSON-over-HTTP access to a single dialogue session.
//!
//! Every body is a JSON object carrying `schema_version`. Handlers hold the
//! session lock for the whole request, so mutations are serialized.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uatm_asp::syntax::parse_program;
use uatm_asp::uatm::{build_network_view, parse_pins, sources, DomainError, VertiportNetwork};

use crate::dialogue::{ActionError, Session};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone)]
pub struct AppState {
    session: Arc<Mutex<Option<Session>>>,
    network: Arc<VertiportNetwork>,
}

impl AppState {
    pub fn new() -> Self {
        let env = parse_program(sources::ENV_INFO).expect("embedded environment parses");
        AppState {
            session: Arc::default(),
            network: Arc::new(build_network_view(&env).expect("embedded environment is definite")),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Option<Session>> {
        // A panic inside a handler leaves the session as it was last
        // written; keep serving it.
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}

/// Adds `schema_version` to a serialized object.
fn envelope(body: impl Serialize) -> Value {
    let mut v = serde_json::to_value(body).expect("response types serialize");
    match &mut v {
        Value::Object(map) => {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
            v
        }
        other => json!({ "schema_version": SCHEMA_VERSION, "data": other.take() }),
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
    extra: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        ApiError {
            status,
            message: message.to_string(),
            extra: None,
        }
    }

    fn no_session() -> Self {
        Self::new(StatusCode::CONFLICT, "no session; POST /api/session first")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        if let Some(extra) = self.extra {
            body["details"] = extra;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Any unreadable body is a 400, whatever axum would have said.
fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    scenario: String,
    #[serde(default)]
    pins: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CongestionRequest {
    corridor: (i64, i64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClearRequest {
    corridor: (i64, i64),
    behind: i64,
}

async fn network(State(st): State<AppState>) -> ApiResult {
    Ok(Json(envelope(&*st.network)))
}

async fn agents(State(st): State<AppState>) -> ApiResult {
    let guard = st.lock();
    let s = guard.as_ref().ok_or_else(ApiError::no_session)?;
    Ok(Json(envelope(json!({ "agents": s.latest().agents }))))
}

fn session_body(s: &Session) -> Value {
    envelope(json!({
        "scenario": s.scenario().name,
        "pins": s.scenario().pins.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "latest": s.latest(),
    }))
}

async fn create_session(
    State(st): State<AppState>,
    payload: Result<Json<SessionRequest>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let pins = parse_pins(&req.pins).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let session = Session::new(&req.scenario, &pins).map_err(|e| {
        let status = match e {
            DomainError::UnknownScenario(_) | DomainError::Pin(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e)
    })?;
    let out = session_body(&session);
    *st.lock() = Some(session);
    Ok(Json(out))
}

async fn get_session(State(st): State<AppState>) -> ApiResult {
    let guard = st.lock();
    let s = guard.as_ref().ok_or_else(ApiError::no_session)?;
    Ok(Json(session_body(s)))
}

fn action_reply(
    result: Result<Vec<crate::dialogue::DialogueTurn>, ActionError>,
    s: &Session,
) -> ApiResult {
    match result {
        Ok(turns) => Ok(Json(envelope(json!({
            "turns": turns,
            "outcome": s.latest().outcome,
            "validation": s.latest().validation,
        })))),
        Err(e) => {
            let status = match e {
                ActionError::Domain(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::BAD_REQUEST,
            };
            let turns = &s.history()[s.history().len() - 2..];
            Err(ApiError {
                extra: Some(json!({ "turns": turns })),
                ..ApiError::new(status, e)
            })
        }
    }
}

async fn report_congestion(
    State(st): State<AppState>,
    payload: Result<Json<CongestionRequest>, JsonRejection>,
) -> ApiResult {
    let mut guard = st.lock();
    let s = guard.as_mut().ok_or_else(ApiError::no_session)?;
    let req = body(payload)?;
    let result = s.report_congestion(req.corridor);
    action_reply(result, s)
}

async fn clear_corridor(
    State(st): State<AppState>,
    payload: Result<Json<ClearRequest>, JsonRejection>,
) -> ApiResult {
    let mut guard = st.lock();
    let s = guard.as_mut().ok_or_else(ApiError::no_session)?;
    let req = body(payload)?;
    let result = s.clear_corridor(req.corridor, req.behind);
    action_reply(result, s)
}

async fn history(State(st): State<AppState>) -> ApiResult {
    let guard = st.lock();
    let turns = guard
        .as_ref()
        .map(|s| s.history().to_vec())
        .unwrap_or_default();
    Ok(Json(envelope(json!({ "turns": turns }))))
}

async fn latest_model(State(st): State<AppState>) -> ApiResult {
    let guard = st.lock();
    let s = guard.as_ref().ok_or_else(ApiError::no_session)?;
    Ok(Json(envelope(s.latest())))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/network", get(network))
        .route("/api/agents", get(agents))
        .route("/api/session", post(create_session).get(get_session))
        .route("/api/actions/report-congestion", post(report_congestion))
        .route("/api/actions/clear-corridor", post(clear_corridor))
        .route("/api/history", get(history))
        .route("/api/models/latest", get(latest_model))
        .fallback(not_found)
        .with_state(state)
}

/// Serves the API on `port` until interrupted.
pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
