//! HTTP routes.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use causeway_core::dataset::VariableKind;
use causeway_core::graph::EditOp;
use futures_util::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{AppState, Control, NewGraph};

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/datasets", post(post_dataset))
        .route("/datasets/{id}/variables", get(get_variables))
        .route("/datasets/{id}/correlations", get(get_correlations))
        .route("/datasets/{id}/matrix", get(get_matrix))
        .route("/jobs", post(post_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/snapshot", get(get_snapshot))
        .route("/jobs/{id}/events", get(get_events))
        .route("/jobs/{id}/{action}", post(post_control))
        .route("/graphs", post(post_graph))
        .route("/graphs/{id}", get(get_graph))
        .route("/graphs/{id}/edits", post(post_edit))
        .route("/graphs/{id}/save", post(post_save))
        .route("/history", get(get_history))
        .route("/history/{id}", get(get_history_entry))
        .route("/comparisons", post(post_comparison))
        .with_state(state)
}

/// Runs blocking state work off the async workers.
async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    let s = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&s)).await.map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect()
}

#[derive(Debug, Default, Deserialize)]
struct IngestQuery {
    #[serde(default)]
    categorical: Option<String>,
    #[serde(default)]
    continuous: Option<String>,
}

async fn post_dataset(State(s): State<Shared>, Query(q): Query<IngestQuery>, body: Bytes) -> ApiResult<crate::state::DatasetInfo> {
    let mut overrides = BTreeMap::new();
    for name in q.categorical.as_deref().map(split_list).unwrap_or_default() {
        overrides.insert(name, VariableKind::Categorical);
    }
    for name in q.continuous.as_deref().map(split_list).unwrap_or_default() {
        if overrides.insert(name.clone(), VariableKind::Continuous).is_some() {
            return Err(ApiError::bad_request("invalid_override", format!("{name:?} is declared both categorical and continuous")));
        }
    }
    blocking(&s, move |s| s.ingest(&body, &overrides)).await.map(Json)
}

async fn get_variables(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<crate::state::DatasetInfo> {
    blocking(&s, move |s| s.dataset_info(&id)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct CorrelationQuery {
    outcome: Option<String>,
    top: Option<usize>,
}

async fn get_correlations(State(s): State<Shared>, Path(id): Path<String>, Query(q): Query<CorrelationQuery>) -> ApiResult<crate::state::CorrelationView> {
    let outcome = q.outcome.ok_or_else(|| ApiError::bad_request("missing_parameter", "query parameter `outcome` is required"))?;
    let top = q.top.unwrap_or(usize::MAX);
    blocking(&s, move |s| s.correlations(&id, &outcome, top)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct MatrixQuery {
    vars: Option<String>,
    cap: Option<usize>,
}

async fn get_matrix(State(s): State<Shared>, Path(id): Path<String>, Query(q): Query<MatrixQuery>) -> ApiResult<causeway_core::dataset::PairMatrix> {
    let vars = q.vars.as_deref().map(split_list).ok_or_else(|| ApiError::bad_request("missing_parameter", "query parameter `vars` is required"))?;
    let cap = q.cap.unwrap_or(500);
    blocking(&s, move |s| s.matrix(&id, &vars, cap)).await.map(Json)
}

async fn post_job(State(s): State<Shared>, body: Bytes) -> ApiResult<crate::state::JobView> {
    let value: Value = parse(&body)?;
    let state = Arc::clone(&s);
    tokio::task::spawn_blocking(move || state.create_job(value)).await.map_err(|e| ApiError::internal(e.to_string()))?.map(Json)
}

async fn get_job(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<crate::state::JobView> {
    s.job(&id).map(Json)
}

async fn get_snapshot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<causeway_core::discovery::DiscoverySnapshot> {
    s.job(&id).map(|j| Json(j.snapshot))
}

async fn post_control(State(s): State<Shared>, Path((id, action)): Path<(String, String)>) -> ApiResult<causeway_core::discovery::DiscoverySnapshot> {
    let op = match action.as_str() {
        "pause" => Control::Pause,
        "resume" => Control::Resume,
        "stop" => Control::Stop,
        other => return Err(ApiError::not_found("job action", other)),
    };
    blocking(&s, move |s| s.control(&id, op)).await.map(Json)
}

/// Server-sent events: the current snapshot first, then every job event.
/// The stream ends when the job finishes.
async fn get_events(State(s): State<Shared>, Path(id): Path<String>) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let (snap, rx) = s.subscribe(&id)?;
    let (tx, out) = tokio::sync::mpsc::channel::<Event>(64);
    let first = Event::default().event("snapshot").json_data(&snap).map_err(|e| ApiError::internal(e.to_string()))?;
    tokio::task::spawn_blocking(move || {
        if tx.blocking_send(first).is_err() {
            return;
        }
        for ev in rx.iter() {
            let name = match &ev {
                causeway_core::discovery::job::JobEvent::Status { .. } => "status",
                causeway_core::discovery::job::JobEvent::Pc { .. } => "pc",
                causeway_core::discovery::job::JobEvent::Hybrid { .. } => "hybrid",
                causeway_core::discovery::job::JobEvent::Epoch { .. } => "epoch",
            };
            let Ok(event) = Event::default().event(name).json_data(&ev) else { continue };
            if tx.blocking_send(event).is_err() {
                return;
            }
        }
    });
    let stream = stream::unfold(out, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn post_graph(State(s): State<Shared>, body: Bytes) -> ApiResult<crate::state::GraphView> {
    let req: NewGraph = parse(&body)?;
    blocking(&s, move |s| s.create_graph(req)).await.map(Json)
}

async fn get_graph(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<crate::state::GraphView> {
    blocking(&s, move |s| s.graph(&id)).await.map(Json)
}

async fn post_edit(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<crate::state::GraphView> {
    let op: EditOp = parse(&body)?;
    blocking(&s, move |s| s.edit(&id, &op)).await.map(Json)
}

async fn post_save(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<crate::store::HistoryEntry> {
    blocking(&s, move |s| s.save(&id)).await.map(Json)
}

async fn get_history(State(s): State<Shared>) -> ApiResult<Vec<crate::store::HistoryEntry>> {
    blocking(&s, |s| s.history()).await.map(Json)
}

async fn get_history_entry(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<crate::store::HistoryEntry> {
    blocking(&s, move |s| s.history_entry(&id)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct ComparisonRequest {
    graph_ids: Vec<String>,
}

async fn post_comparison(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: ComparisonRequest = parse(&body)?;
    blocking(&s, move |s| s.compare(&req.graph_ids)).await.map(Json)
}
