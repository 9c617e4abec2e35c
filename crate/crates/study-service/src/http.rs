//! JSON routes over [`Study`] plus static hosting of the UI.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::study::{CreateRequest, Study, SubmitRequest};
use crate::StudyError;

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            StudyError::Auth => (StatusCode::UNAUTHORIZED, "auth"),
            StudyError::Forbidden => (StatusCode::FORBIDDEN, "forbidden"),
            StudyError::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
            StudyError::Capacity(_) => (StatusCode::SERVICE_UNAVAILABLE, "capacity"),
            StudyError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self, "request failed");
        }
        let mut body = json!({ "error": code, "message": self.to_string() });
        if let StudyError::Conflict { expected, .. } = self {
            body["expected_step"] = json!(expected);
        }
        (status, Json(body)).into_response()
    }
}

/// Runs blocking study work (file syncs, locks) off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StudyError> + Send + 'static,
) -> Result<T, StudyError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| StudyError::Io(std::io::Error::other(e.to_string())))?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(
    State(study): State<Arc<Study>>,
    body: Option<Json<CreateRequest>>,
) -> Result<impl IntoResponse, StudyError> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let created = blocking(move || study.create(&req)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn current_trial(
    State(study): State<Arc<Study>>,
    Path(token): Path<String>,
) -> Result<impl IntoResponse, StudyError> {
    Ok(Json(blocking(move || study.current(&token)).await?))
}

async fn submit_decision(
    State(study): State<Arc<Study>>,
    Path(token): Path<String>,
    Json(req): Json<SubmitRequest>,
) -> Result<impl IntoResponse, StudyError> {
    let trial = blocking(move || study.submit(&token, &req)).await?;
    Ok(Json(json!({ "accepted": true, "trial": trial })))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    include_excluded: bool,
}

fn check_admin(study: &Study, headers: &HeaderMap) -> Result<(), StudyError> {
    let expected = study.config().admin_token.as_deref().ok_or(StudyError::Forbidden)?;
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or(StudyError::Forbidden)?;
    if constant_time_eq(given.as_bytes(), expected.as_bytes()) {
        Ok(())
    } else {
        Err(StudyError::Forbidden)
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn export(
    State(study): State<Arc<Study>>,
    headers: HeaderMap,
    Query(q): Query<ExportQuery>,
) -> Result<impl IntoResponse, StudyError> {
    check_admin(&study, &headers)?;
    let body = blocking(move || study.export(q.include_excluded)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

pub fn router(study: Arc<Study>) -> Router {
    let static_dir = study.config().static_dir.clone();
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{token}/trial", get(current_trial))
        .route("/api/sessions/{token}/decisions", post(submit_decision))
        .route("/api/export", get(export))
        .with_state(study);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}
