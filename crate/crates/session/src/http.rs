//! JSON-over-HTTP surface for [`SessionStore`].
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create, returns `{id}` |
//! | GET | `/sessions/{id}` | phase, seats, pieces, transcript once complete |
//! | GET | `/sessions/{id}/queries/next?agent=k` | outstanding query for seat `k` or `null` |
//! | POST | `/sessions/{id}/answers` | `{agent, value}` |
//! | POST | `/sessions/{id}/choice` | `{piece}` |
//! | GET | `/sessions/{id}/result` | pieces, allocation, verification |
//!
//! Unknown sessions are 404, phase or turn conflicts 409, and malformed or
//! out-of-range input 422.

use std::sync::Arc;

use axum::extract::{Path, Query as QueryParams, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cakecut::{Rational, Valuation};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::session::{SessionConfig, SessionError};
use crate::store::{SessionStore, StoreError};

pub struct ApiError(StoreError);

impl<E: Into<StoreError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self.0 {
            StoreError::Session(e) => {
                let status = match e {
                    SessionError::NotFound(_) => StatusCode::NOT_FOUND,
                    SessionError::Conflict(_) => StatusCode::CONFLICT,
                    SessionError::Validation(_) | SessionError::OutOfRange { .. } => {
                        StatusCode::UNPROCESSABLE_ENTITY
                    }
                };
                let mut body = json!({ "error": e.to_string() });
                if let SessionError::OutOfRange { lo, hi, .. } = e {
                    body["bounds"] = json!([lo, hi]);
                }
                (status, body)
            }
            other => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": other.to_string() })),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

#[derive(Debug, Deserialize)]
struct CreateBody {
    guests: Vec<String>,
    secret: Option<String>,
    valuations: Option<Vec<Valuation>>,
}

#[derive(Debug, Deserialize)]
struct NextParams {
    agent: u32,
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    agent: u32,
    value: String,
}

#[derive(Debug, Deserialize)]
struct ChoiceBody {
    piece: usize,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/queries/next", get(next_query))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/choice", post(choice))
        .route("/sessions/{id}/result", get(result))
        .with_state(store)
}

async fn create(State(store): State<Arc<SessionStore>>, Json(body): Json<CreateBody>) -> ApiResult {
    let mut config = SessionConfig::live(body.guests);
    if let Some(secret) = body.secret {
        config.secret = secret;
    }
    config.valuations = body.valuations;
    let snap = store.create(config)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": snap.id, "session": *snap }))).into_response())
}

async fn status(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(store.snapshot(&id)?.as_ref().clone()).into_response())
}

async fn next_query(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    QueryParams(p): QueryParams<NextParams>,
) -> ApiResult {
    let q = store.next_query(&id, p.agent)?;
    Ok(Json(json!({ "query": q })).into_response())
}

async fn answer(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Json(body): Json<AnswerBody>,
) -> ApiResult {
    let value = Rational::parse_lenient(&body.value)
        .map_err(|e| SessionError::Validation(format!("value {:?}: {e}", body.value)))?;
    let snap = store.submit_answer(&id, body.agent, value)?;
    Ok(Json(json!({ "accepted": true, "phase": snap.phase, "queries_answered": snap.queries_answered }))
        .into_response())
}

async fn choice(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Json(body): Json<ChoiceBody>,
) -> ApiResult {
    let snap = store.submit_choice(&id, body.piece)?;
    let mut out = json!({ "phase": snap.phase });
    if let Some(r) = &snap.result {
        out["result"] = serde_json::to_value(r).expect("result serializes");
    }
    Ok(Json(out).into_response())
}

async fn result(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let r = store.result(&id)?;
    let body: Value = serde_json::to_value(&r).expect("result serializes");
    Ok(Json(body).into_response())
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<SessionStore>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
