//! HTTP routes, request/response bodies and error mapping.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ministack_core::orchestrator::{OrchestratorError, SubmissionRequest};
use ministack_core::qdmi::{JobId, JobRecord, JobState, QdmiError, SessionId, StateStamp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::AppState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: error.into(), message: message.into() } }
    }

    fn unauthorized(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<QdmiError> for ApiError {
    fn from(e: QdmiError) -> Self {
        let (status, code) = match &e {
            QdmiError::Auth(_) | QdmiError::AlreadyClosed => (StatusCode::UNAUTHORIZED, "unauthorized"),
            QdmiError::UnknownDevice(_) => (StatusCode::NOT_FOUND, "unknown_device"),
            QdmiError::UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
            QdmiError::UnknownKey(_) => (StatusCode::NOT_FOUND, "unknown_key"),
            QdmiError::NotDone(_) => (StatusCode::CONFLICT, "not_done"),
            QdmiError::AlreadyTerminal(_) | QdmiError::IllegalTransition { .. } => (StatusCode::CONFLICT, "state_conflict"),
            QdmiError::Validation(_) | QdmiError::Limit(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Parse(m) => ApiError::new(StatusCode::BAD_REQUEST, "parse_error", m),
            OrchestratorError::Invalid(m) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", m),
            OrchestratorError::NoHealthyDevice => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_healthy_device", "no healthy device can take the job")
            }
            OrchestratorError::Qdmi(q) => q.into(),
        }
    }
}

/// JSON body that answers malformed input with a 400 in the API's error shape.
pub struct JsonBody<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> axum::extract::FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))?;
        serde_json::from_slice(&bytes)
            .map(JsonBody)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
    }
}

/// Session named by the `Authorization: Bearer` header.
pub struct Bearer(pub SessionId);

impl FromRequestParts<AppState> for Bearer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let value = parts
            .headers
            .get(header::AUTHORIZATION)
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?
            .to_str()
            .map_err(|_| ApiError::unauthorized("malformed authorization header"))?;
        let token = value
            .strip_prefix("Bearer ")
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ApiError::unauthorized("expected `Bearer <session_id>`"))?;
        let id = SessionId(token.to_string());
        state.orchestrator.qdmi().check_session(&id)?;
        Ok(Bearer(id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: SessionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: JobId,
}

/// A job as the API shows it: the record without its owner's session id or
/// its counts (those come with the result).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: JobId,
    pub state: JobState,
    pub device_id: Option<String>,
    pub shots: u64,
    pub priority: u8,
    pub seed: u64,
    pub seq: Option<u64>,
    pub est_exec_s: Option<f64>,
    pub transitions: Vec<StateStamp>,
    pub error: Option<String>,
    pub program: Option<String>,
}

impl From<JobRecord> for JobView {
    fn from(r: JobRecord) -> Self {
        JobView {
            job_id: r.job_id,
            state: r.state,
            device_id: r.device_id,
            shots: r.shots,
            priority: r.priority,
            seed: r.seed,
            seq: r.seq,
            est_exec_s: r.est_exec_s,
            transitions: r.transitions,
            error: r.error,
            program: r.program,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.static_dir.clone();
    let api = Router::new()
        .route("/v1/sessions", post(open_session).delete(close_session))
        .route("/v1/jobs", post(submit).get(list_jobs))
        .route("/v1/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/v1/jobs/{id}/result", get(get_result))
        .route("/v1/devices", get(list_devices))
        .route("/v1/devices/{id}", get(get_device))
        .route("/v1/devices/{id}/telemetry", get(get_telemetry))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") }),
    }
}

async fn open_session(State(s): State<AppState>, JsonBody(req): JsonBody<SessionRequest>) -> Result<impl IntoResponse, ApiError> {
    let session = s.orchestrator.qdmi().session_open(&req.token)?;
    Ok((StatusCode::CREATED, Json(SessionResponse { session_id: session.session_id })))
}

async fn close_session(State(s): State<AppState>, Bearer(session): Bearer) -> Result<StatusCode, ApiError> {
    s.orchestrator.qdmi().session_close(&session)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn submit(
    State(s): State<AppState>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Bearer(session): Bearer,
    JsonBody(req): JsonBody<SubmissionRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let origin = s.origin.detect(peer.ip(), &headers);
    let orch = s.orchestrator.clone();
    let job_id = tokio::task::spawn_blocking(move || orch.submit(&session, &req, origin))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    log::info!("accepted {job_id} ({origin:?})");
    Ok((StatusCode::CREATED, Json(SubmitResponse { job_id })))
}

async fn list_jobs(State(s): State<AppState>, _auth: Bearer) -> Json<Vec<JobView>> {
    Json(s.orchestrator.qdmi().jobs().into_iter().map(JobView::from).collect())
}

async fn get_job(State(s): State<AppState>, _auth: Bearer, Path(id): Path<String>) -> Result<Json<JobView>, ApiError> {
    Ok(Json(s.orchestrator.job(&JobId(id))?.into()))
}

async fn cancel_job(State(s): State<AppState>, _auth: Bearer, Path(id): Path<String>) -> Result<Json<JobView>, ApiError> {
    let id = JobId(id);
    s.orchestrator.cancel(&id)?;
    Ok(Json(s.orchestrator.job(&id)?.into()))
}

async fn get_result(State(s): State<AppState>, _auth: Bearer, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.orchestrator.result(&JobId(id))?))
}

async fn list_devices(State(s): State<AppState>, _auth: Bearer) -> impl IntoResponse {
    Json(s.orchestrator.devices())
}

async fn get_device(State(s): State<AppState>, _auth: Bearer, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.orchestrator.device_summary(&id)?))
}

async fn get_telemetry(State(s): State<AppState>, _auth: Bearer, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.orchestrator.qdmi().telemetry(&id)?))
}
