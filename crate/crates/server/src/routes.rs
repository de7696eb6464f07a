use std::collections::HashSet;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use taxonomist_core::index::{Neighbor, Query as IndexQuery};
use taxonomist_core::ingest::CorpusItem;
use taxonomist_core::session::{SessionError, DEFAULT_K_PER_MEMBER};

use crate::error::ApiError;
use crate::state::AppState;

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;
pub const DEFAULT_NEIGHBORS: usize = 10;

pub fn router(state: Arc<AppState>) -> Router {
    let v1 = Router::new()
        .route("/corpus", get(corpus))
        .route("/corpus/items", get(corpus_items))
        .route("/outputs", get(outputs))
        .route("/outputs/{id}", get(output))
        .route("/items/{id}/neighbors", get(neighbors))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/seed", post(seed))
        .route("/sessions/{id}/candidates", post(candidates))
        .route("/sessions/{id}/accept", post(accept))
        .route("/sessions/{id}/reject", post(reject))
        .route("/sessions/{id}/unignore", post(unignore))
        .route("/sessions/{id}/polygon", post(polygon))
        .route("/sessions/{id}/switch", post(switch))
        .route("/sessions/{id}/commit", post(commit))
        .route("/taxonomy", get(taxonomy))
        .route("/taxonomy/export", get(export));
    Router::new()
        .nest("/v1", v1)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    Ok(b?.0)
}

/// Runs a session-engine call off the async executor.
async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Serialize)]
struct CorpusInfo {
    item_count: usize,
    pipeline_report: taxonomist_core::ingest::PipelineReport,
}

async fn corpus(State(s): Shared) -> Json<CorpusInfo> {
    Json(CorpusInfo {
        item_count: s.corpus.len(),
        pipeline_report: s.corpus.pipeline_report.clone(),
    })
}

#[derive(Deserialize)]
struct ItemsQuery {
    #[serde(default)]
    query: String,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct ItemPage {
    total: usize,
    offset: usize,
    limit: usize,
    items: Vec<CorpusItem>,
}

/// Case-insensitive substring search over canonical texts, in corpus order.
async fn corpus_items(State(s): Shared, q: Result<Query<ItemsQuery>, QueryRejection>) -> ApiResult<ItemPage> {
    let q = q?.0;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::invalid(format!("limit must be in 1..={MAX_PAGE}")));
    }
    let needle = q.query.to_lowercase();
    let matches: Vec<&CorpusItem> = s
        .corpus
        .items
        .iter()
        .filter(|i| i.canonical_text.to_lowercase().contains(&needle))
        .collect();
    Ok(Json(ItemPage {
        total: matches.len(),
        offset: q.offset,
        limit,
        items: matches.into_iter().skip(q.offset).take(limit).cloned().collect(),
    }))
}

async fn outputs(State(s): Shared) -> Json<serde_json::Value> {
    Json(serde_json::to_value(&s.grid.cells).expect("cells serialize"))
}

async fn output(State(s): Shared, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let p = s
        .projections
        .get(&id)
        .ok_or_else(|| ApiError::from(SessionError::UnknownOutput(id)))?;
    Ok(Json(serde_json::to_value(p).expect("projection serializes")))
}

#[derive(Deserialize)]
struct NeighborQuery {
    k: Option<usize>,
    model: Option<String>,
}

#[derive(Serialize)]
struct NeighborResponse {
    item_id: String,
    model_id: String,
    neighbors: Vec<Neighbor>,
}

/// Nearest other items by angular distance on one model's index.
async fn neighbors(
    State(s): Shared,
    Path(id): Path<String>,
    q: Result<Query<NeighborQuery>, QueryRejection>,
) -> ApiResult<NeighborResponse> {
    let q = q?.0;
    let k = q.k.unwrap_or(DEFAULT_NEIGHBORS);
    if k == 0 {
        return Err(ApiError::invalid("k must be at least 1"));
    }
    let model = match q.model {
        Some(m) => m,
        None => s
            .grid
            .cells
            .first()
            .map(|c| c.model_id.clone())
            .ok_or_else(|| ApiError::invalid("store has no models"))?,
    };
    if s.corpus.position(&id).is_none() {
        return Err(SessionError::UnknownItem(id).into());
    }
    blocking(&s, move |s| {
        let tree = s
            .workbench
            .tree(&model)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_model", format!("unknown model {model}")))?;
        let exclude = HashSet::from([id.clone()]);
        let found = tree
            .knn(IndexQuery::Id(&id), k, &exclude)
            .map_err(|e| ApiError::from(SessionError::Index(e.to_string())))?;
        Ok(Json(NeighborResponse {
            item_id: id,
            model_id: model,
            neighbors: found,
        }))
    })
    .await
}

#[derive(Deserialize)]
struct CreateSession {
    output_id: String,
    k_per_member: Option<usize>,
}

async fn create_session(
    State(s): Shared,
    b: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let req = body(b)?;
    let k = req.k_per_member.unwrap_or(DEFAULT_K_PER_MEMBER);
    blocking(&s, move |s| {
        let session = s.workbench.create_session(&req.output_id, Some(k))?;
        s.persist_session(&session.session_id)?;
        Ok((StatusCode::CREATED, Json(serde_json::to_value(session).expect("session serializes"))))
    })
    .await
}

async fn session(State(s): Shared, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let snapshot = s.workbench.session(&id)?;
    Ok(Json(serde_json::to_value(snapshot).expect("session serializes")))
}

/// Applies a mutation and persists the session; `commit` also persists the taxonomy.
async fn mutate<T, F>(s: &Arc<AppState>, id: String, commit: bool, f: F) -> Result<Json<serde_json::Value>, ApiError>
where
    T: Serialize,
    F: FnOnce(&AppState, &str) -> Result<T, SessionError> + Send + 'static,
{
    blocking(s, move |s| {
        let out = f(s, &id)?;
        if commit {
            s.persist_taxonomy()?;
        }
        s.persist_session(&id)?;
        Ok(Json(serde_json::to_value(out).expect("response serializes")))
    })
    .await
}

#[derive(Deserialize)]
struct SeedBody {
    item_id: String,
}

#[derive(Deserialize)]
struct ItemsBody {
    item_ids: Vec<String>,
}

#[derive(Deserialize)]
struct PolygonBody {
    output_id: Option<String>,
    polygon: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct SwitchBody {
    output_id: String,
}

#[derive(Deserialize)]
struct CommitBody {
    label: String,
}

async fn seed(State(s): Shared, Path(id): Path<String>, b: Result<Json<SeedBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| s.workbench.seed_item(id, &req.item_id)).await
}

async fn candidates(State(s): Shared, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    mutate(&s, id, false, |s, id| s.workbench.compute_candidates(id)).await
}

async fn accept(State(s): Shared, Path(id): Path<String>, b: Result<Json<ItemsBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| s.workbench.accept_candidates(id, &req.item_ids)).await
}

async fn reject(State(s): Shared, Path(id): Path<String>, b: Result<Json<ItemsBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| s.workbench.reject_candidates(id, &req.item_ids)).await
}

async fn unignore(State(s): Shared, Path(id): Path<String>, b: Result<Json<ItemsBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| s.workbench.unignore(id, &req.item_ids)).await
}

/// Selects inside a polygon drawn on `output_id`, defaulting to the session's active output.
async fn polygon(State(s): Shared, Path(id): Path<String>, b: Result<Json<PolygonBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| {
        let output = match req.output_id {
            Some(o) => o,
            None => s.workbench.session(id)?.active_output_id,
        };
        s.workbench.polygon_select(id, &output, &req.polygon)
    })
    .await
}

async fn switch(State(s): Shared, Path(id): Path<String>, b: Result<Json<SwitchBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, false, move |s, id| s.workbench.switch_output(id, &req.output_id)).await
}

async fn commit(State(s): Shared, Path(id): Path<String>, b: Result<Json<CommitBody>, JsonRejection>) -> Result<Json<serde_json::Value>, ApiError> {
    let req = body(b)?;
    mutate(&s, id, true, move |s, id| s.workbench.commit_class(id, &req.label)).await
}

async fn taxonomy(State(s): Shared) -> Json<serde_json::Value> {
    Json(serde_json::to_value(s.workbench.taxonomy()).expect("taxonomy serializes"))
}

async fn export(State(s): Shared) -> Json<serde_json::Value> {
    Json(serde_json::to_value(s.workbench.export_taxonomy()).expect("export serializes"))
}
