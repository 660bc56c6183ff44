//! HTTP API over in-memory models and diagnosis sessions.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | POST | `/models` | `{"model": text, "seed"?: n}` or the model text | model summary |
//! | GET | `/models/{id}` | | model summary |
//! | GET | `/models/{id}/explanation?var=&value=` | | explanation document |
//! | POST | `/models/{id}/sessions` | `{"var", "value", "strategy"?, "expected"?}` | session view |
//! | GET | `/sessions/{id}` | | session view |
//! | POST | `/sessions/{id}/answer` | `{"answer": "YES"\|"NO"\|"UNKNOWN", "var"?, "value"?}` or the bare answer | session view |
//!
//! Errors are `{"error": message}` with status 400 (malformed request),
//! 404 (unknown id) or 409 (answer to a finished session, or to a question
//! that is no longer pending).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fdexplain::lang::{
    export_explanation, parse_expected, render_closure, DocumentMetadata, ExplanationDocument,
    PairRecord, SessionView,
};
use fdexplain::{Answer, DiagnosisSession, Error, ExpectedEnv, Strategy};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::{resolve_pair, schedule_for, LoadedModel};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("unknown {what} `{id}`"),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct SessionEntry {
    model_id: String,
    model: Arc<LoadedModel>,
    created_at: u64,
    session: DiagnosisSession,
}

/// Shared server state. Models are immutable once stored; each session is
/// behind its own lock, so answers to one session are serialized without
/// blocking the others.
#[derive(Clone, Default)]
pub struct AppState {
    models: Arc<RwLock<HashMap<String, Arc<LoadedModel>>>>,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>>,
}

impl AppState {
    fn model(&self, id: &str) -> ApiResult<Arc<LoadedModel>> {
        self.models
            .read()
            .expect("model table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<SessionEntry>>> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/explanation", get(get_explanation))
        .route("/models/{id}/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(answer_session))
        .with_state(state)
}

/// Serves the API until interrupted.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"))
}

fn json_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

fn text_body(body: &[u8]) -> ApiResult<&str> {
    std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not UTF-8"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRequest {
    model: String,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VariableSummary {
    pub name: String,
    pub domain: Vec<i64>,
    pub kept: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ModelSummary {
    pub id: String,
    pub model_hash: String,
    pub schedule_seed: Option<u64>,
    pub constraints: Vec<String>,
    pub variables: Vec<VariableSummary>,
    pub removed: usize,
    /// The closure as `VAR: values` lines.
    pub closure: String,
}

fn summary(id: &str, model: &LoadedModel) -> ModelSummary {
    let u = model.csp.universe();
    let env = model.closure.final_env();
    ModelSummary {
        id: id.to_string(),
        model_hash: model.hash.clone(),
        schedule_seed: model.closure.schedule().seed(),
        constraints: model.csp.constraints().iter().map(|c| c.label().to_string()).collect(),
        variables: u
            .var_ids()
            .map(|v| VariableSummary {
                name: u.name(v).to_string(),
                domain: u.var(v).values().to_vec(),
                kept: env.values(v).collect(),
            })
            .collect(),
        removed: model.closure.store().len(),
        closure: render_closure(env),
    }
}

async fn create_model(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ModelSummary>)> {
    let (text, seed) = if is_json(&headers) {
        let req: ModelRequest = json_body(&body)?;
        (req.model, req.seed)
    } else {
        (text_body(&body)?.to_string(), None)
    };
    let model = LoadedModel::from_text(&text, schedule_for(seed))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = Uuid::new_v4().to_string();
    let reply = summary(&id, &model);
    state
        .models
        .write()
        .expect("model table lock")
        .insert(id, model.into_shared());
    Ok((StatusCode::CREATED, Json(reply)))
}

async fn get_model(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ModelSummary>> {
    let model = state.model(&id)?;
    Ok(Json(summary(&id, &model)))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExplanationReply {
    pub pair: PairRecord,
    /// The value is in the closure, so there is nothing to explain.
    pub kept: bool,
    pub explanation: Option<ExplanationDocument>,
}

async fn get_explanation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<ExplanationReply>> {
    let model = state.model(&id)?;
    let var = query
        .get("var")
        .ok_or_else(|| ApiError::bad_request("missing query parameter `var`"))?;
    let value: i64 = query
        .get("value")
        .ok_or_else(|| ApiError::bad_request("missing query parameter `value`"))?
        .parse()
        .map_err(|_| ApiError::bad_request("`value` must be an integer"))?;
    let pair = resolve_pair(&model, var, value).map_err(ApiError::bad_request)?;
    let u = model.csp.universe();
    let tree = model
        .closure
        .explanation_for(pair)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let explanation = tree.map(|t| {
        export_explanation(&t, u, DocumentMetadata::new(&model.csp, model.closure.schedule()))
    });
    Ok(Json(ExplanationReply {
        pair: PairRecord::new(u, pair),
        kept: explanation.is_none(),
        explanation,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    var: String,
    value: i64,
    strategy: Option<String>,
    /// Expected environment text; the symptom must be expected in it.
    expected: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SessionReply {
    pub id: String,
    pub model_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    #[serde(flatten)]
    pub view: SessionView,
}

fn reply(id: &str, entry: &SessionEntry) -> SessionReply {
    SessionReply {
        id: id.to_string(),
        model_id: entry.model_id.clone(),
        created_at: entry.created_at,
        view: SessionView::new(&entry.model.program, &entry.session),
    }
}

async fn create_session(
    State(state): State<AppState>,
    Path(model_id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionReply>)> {
    let model = state.model(&model_id)?;
    let req: SessionRequest = json_body(&body)?;
    let strategy: Strategy = match &req.strategy {
        Some(s) => s.parse().map_err(ApiError::bad_request)?,
        None => Strategy::default(),
    };
    let pair = resolve_pair(&model, &req.var, req.value).map_err(ApiError::bad_request)?;
    let u = model.csp.universe();
    let tree = model
        .closure
        .explanation_for(pair)
        .map_err(|e| ApiError::bad_request(e.to_string()))?
        .ok_or_else(|| {
            ApiError::bad_request(format!("{} is not a symptom: it was kept", u.show(pair)))
        })?;
    let session = match &req.expected {
        Some(text) => {
            let env = parse_expected(text, u).map_err(|e| ApiError::bad_request(e.to_string()))?;
            DiagnosisSession::with_expected(&tree, strategy, &ExpectedEnv::from_environment(&env))
        }
        None => DiagnosisSession::new(u, &tree, strategy),
    }
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let entry = SessionEntry {
        model_id,
        model,
        created_at,
        session,
    };
    let id = Uuid::new_v4().to_string();
    let body = reply(&id, &entry);
    state
        .sessions
        .write()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionReply>> {
    let entry = state.session(&id)?;
    let entry = entry.lock().expect("session lock");
    Ok(Json(reply(&id, &entry)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    answer: String,
    /// When given, the answer is only accepted if this pair is pending.
    var: Option<String>,
    value: Option<i64>,
}

async fn answer_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<SessionReply>> {
    let entry = state.session(&id)?;
    let req = if is_json(&headers) {
        json_body::<AnswerRequest>(&body)?
    } else {
        AnswerRequest {
            answer: text_body(&body)?.trim().to_string(),
            var: None,
            value: None,
        }
    };
    let answer: Answer = req.answer.parse().map_err(ApiError::bad_request)?;
    let mut entry = entry.lock().expect("session lock");
    let pending = entry
        .session
        .pending()
        .ok_or_else(|| ApiError::conflict("the session is finished and accepts no answers"))?;
    let target = match (&req.var, req.value) {
        (None, None) => pending,
        (Some(var), Some(value)) => resolve_pair(&entry.model, var, value).map_err(ApiError::bad_request)?,
        _ => return Err(ApiError::bad_request("give both `var` and `value`, or neither")),
    };
    entry.session.answer(target, answer).map_err(|e| match e {
        Error::StaleQuestion { .. } | Error::SessionDone => ApiError::conflict(e.to_string()),
        other => ApiError::bad_request(other.to_string()),
    })?;
    Ok(Json(reply(&id, &entry)))
}
