//! REST endpoints over a [`SessionStore`].
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | raw upload, plain text or span tags |
//! | GET | `/sessions` | session ids |
//! | GET | `/sessions/{id}/sentences?cursor=&limit=` | paged sentence states |
//! | GET | `/sessions/{id}/sentences/{n}` | one sentence |
//! | PUT | `/sessions/{id}/sentences/{n}/spans` | `{start, end, polarity, version}` |
//! | DELETE | `/sessions/{id}/sentences/{n}/spans?start=&end=&version=` | |
//! | POST | `/sessions/{id}/sentences/{n}/proposals/{k}/accept` | `{version}` |
//! | POST | `/sessions/{id}/sentences/{n}/proposals/{k}/reject` | `{version}` |
//! | POST | `/sessions/{id}/autolabel` | `{source}` |
//! | GET | `/sessions/{id}/export?kind=&include_proposals=` | document |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use super::{parse_upload, EditError, SessionStore};
use crate::checkpoint::{self, CheckpointError, Lookup};
use crate::training::Predictor;
use crate::{AspectSpan, EncodingKind, Polarity, TaskKind};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

#[derive(Debug)]
pub struct AppState {
    pub store: SessionStore,
    /// Where autolabel resolves predictor sources.
    pub lookup: Lookup,
}

impl IntoResponse for EditError {
    fn into_response(self) -> Response {
        let status = match &self {
            EditError::SessionNotFound(_)
            | EditError::SentenceOutOfRange { .. }
            | EditError::NoSuchSpan { .. }
            | EditError::NoSuchProposal { .. }
            | EditError::Checkpoint(CheckpointError::NotFound(_)) => StatusCode::NOT_FOUND,
            EditError::VersionConflict { .. } => StatusCode::CONFLICT,
            EditError::Upload(_) | EditError::Corpus(_) => StatusCode::BAD_REQUEST,
            EditError::InvalidSpan(_) | EditError::Overlap { .. } | EditError::Checkpoint(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            EditError::Journal(_) | EditError::Predictor(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.to_string() });
        if let EditError::VersionConflict { current, .. } = self {
            body["current_version"] = json!(current);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, EditError>;

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}/sentences", get(sentences))
        .route("/sessions/{id}/sentences/{n}", get(sentence))
        .route("/sessions/{id}/sentences/{n}/spans", put(set_span).delete(delete_span))
        .route("/sessions/{id}/sentences/{n}/proposals/{k}/accept", post(accept))
        .route("/sessions/{id}/sentences/{n}/proposals/{k}/reject", post(reject))
        .route("/sessions/{id}/autolabel", post(autolabel))
        .route("/sessions/{id}/export", get(export))
        .with_state(state);
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.layer(CorsLayer::permissive())
}

/// Serve until Ctrl-C, then snapshot every session.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state.clone(), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    state.store.snapshot_all().map_err(std::io::Error::other)?;
    Ok(())
}

async fn create(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let examples = parse_upload(&body)?;
    let id = state.store.create(&examples)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "sentences": examples.len() }))).into_response())
}

async fn list(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(state.store.ids())
}

#[derive(Debug, Deserialize)]
struct Page {
    cursor: Option<usize>,
    limit: Option<usize>,
}

async fn sentences(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(page): Query<Page>) -> ApiResult {
    let session = state.store.get(&id)?;
    let s = session.lock();
    let all = s.sentences();
    let start = page.cursor.unwrap_or(0).min(all.len());
    let limit = page.limit.unwrap_or(DEFAULT_PAGE).clamp(1, MAX_PAGE);
    let end = (start + limit).min(all.len());
    let items: Vec<_> = (start..end).map(|i| json!({ "index": i, "sentence": all[i] })).collect();
    let next = (end < all.len()).then_some(end);
    Ok(Json(json!({ "total": all.len(), "sentences": items, "next_cursor": next })).into_response())
}

async fn sentence(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, usize)>) -> ApiResult {
    let session = state.store.get(&id)?;
    let s = session.lock();
    Ok(Json(s.sentence(n)?.clone()).into_response())
}

#[derive(Debug, Deserialize)]
struct SpanBody {
    start: usize,
    end: usize,
    polarity: Polarity,
    version: u64,
}

#[derive(Debug, Deserialize)]
struct SpanRef {
    start: usize,
    end: usize,
    version: u64,
}

#[derive(Debug, Deserialize)]
struct VersionBody {
    version: u64,
}

fn version_reply(version: u64) -> Response {
    Json(json!({ "version": version })).into_response()
}

async fn set_span(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, usize)>,
    Json(body): Json<SpanBody>,
) -> ApiResult {
    let span = AspectSpan::new(body.start, body.end, body.polarity);
    Ok(version_reply(state.store.edit(&id, |s| s.set_span(n, span, body.version))?))
}

async fn delete_span(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, usize)>,
    Query(q): Query<SpanRef>,
) -> ApiResult {
    Ok(version_reply(state.store.edit(&id, |s| s.delete_span(n, q.start, q.end, q.version))?))
}

async fn accept(
    State(state): State<Arc<AppState>>,
    Path((id, n, k)): Path<(String, usize, usize)>,
    Json(body): Json<VersionBody>,
) -> ApiResult {
    Ok(version_reply(state.store.edit(&id, |s| s.accept(n, k, body.version))?))
}

async fn reject(
    State(state): State<Arc<AppState>>,
    Path((id, n, k)): Path<(String, usize, usize)>,
    Json(body): Json<VersionBody>,
) -> ApiResult {
    Ok(version_reply(state.store.edit(&id, |s| s.reject(n, k, body.version))?))
}

#[derive(Debug, Deserialize)]
struct AutolabelBody {
    source: String,
}

async fn autolabel(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<AutolabelBody>,
) -> ApiResult {
    let session = state.store.get(&id)?;
    let worker = state.clone();
    let count = tokio::task::spawn_blocking(move || -> Result<usize, EditError> {
        let lookup = Lookup { task: Some(TaskKind::Atesc), ..worker.lookup.clone() };
        let (meta, model) = checkpoint::load_predictor(&body.source, &lookup)?;
        let pending = {
            let s = session.lock();
            if s.has_source(&meta.digest) {
                return Ok(0);
            }
            s.unconfirmed()
        };
        let predictions = pending
            .into_iter()
            .map(|(n, ex)| Ok((n, model.infer(&ex)?.spans)))
            .collect::<Result<Vec<_>, EditError>>()?;
        worker.store.edit(&id, |s| s.propose(&meta.digest, predictions))
    })
    .await
    .map_err(|e| EditError::Journal(e.to_string()))??;
    Ok(Json(json!({ "proposed": count })).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    kind: Option<String>,
    #[serde(default)]
    include_proposals: bool,
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let kind: EncodingKind = match q.kind.as_deref() {
        None => EncodingKind::AtescColumns,
        Some(k) => k.parse().map_err(EditError::Upload)?,
    };
    let session = state.store.get(&id)?;
    let doc = session.lock().export(kind, q.include_proposals)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], doc).into_response())
}
