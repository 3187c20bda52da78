//! HTTP routes.
//!
//! | method | path                              |
//! |--------|-----------------------------------|
//! | PUT    | `/api/v1/videos/{id}`             |
//! | POST   | `/api/v1/events`                  |
//! | GET    | `/api/v1/videos/{id}/series`      |
//! | GET    | `/api/v1/videos/{id}/keyframes`   |
//! | GET    | `/api/v1/videos/{id}/thumbnail`   |
//! | GET    | `/healthz`                        |

// Early-return helpers carry a ready `Response` as their error.
#![allow(clippy::result_large_err)]

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use replaykey_core::analysis::{self, AnalysisError, AnalysisParams};
use replaykey_core::event::{parse_event_value, Genre, InteractionEvent, VideoMeta};
use replaykey_core::peaks::{self, DEFAULT_CANDIDATE_WINDOW_S};
use replaykey_core::series;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::store::{EventStore, Registration, StoreError, VideoSnapshot};

/// Largest accepted batch.
pub const MAX_BATCH: usize = 10_000;
const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

pub type SharedStore = Arc<EventStore>;

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/api/v1/events", post(post_events))
        .route("/api/v1/videos/{id}", put(register_video))
        .route("/api/v1/videos/{id}/series", get(get_series))
        .route("/api/v1/videos/{id}/keyframes", get(get_keyframes))
        .route("/api/v1/videos/{id}/thumbnail", get(get_thumbnail))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn store_error(e: StoreError) -> Response {
    let status = match e {
        StoreError::StorageFailure(_) | StoreError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        StoreError::Conflict { .. } => StatusCode::CONFLICT,
        StoreError::InvalidVideoId(_) | StoreError::CueOutOfRange { .. } | StoreError::InvalidMeta(_) => {
            StatusCode::BAD_REQUEST
        }
    };
    if status == StatusCode::INTERNAL_SERVER_ERROR {
        tracing::error!(error = %e, "store failure");
    }
    error(status, e.to_string())
}

fn analysis_error(e: AnalysisError) -> Response {
    error(StatusCode::BAD_REQUEST, e.to_string())
}

fn no_peaks() -> Response {
    (StatusCode::CONFLICT, Json(json!({ "thumbnail_time_s": 0, "fallback": true }))).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking store task panicked")
}

async fn health(State(store): State<SharedStore>) -> Response {
    Json(json!({
        "status": "ok",
        "videos": store.registered_count(),
        "events": store.event_count(),
    }))
    .into_response()
}

#[derive(Deserialize)]
struct MetaBody {
    video_id: Option<String>,
    duration_s: u32,
    genre: Option<Genre>,
    title: Option<String>,
}

async fn register_video(State(store): State<SharedStore>, Path(id): Path<String>, body: Bytes) -> Response {
    let body: MetaBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid video meta: {e}")),
    };
    if body.video_id.as_deref().is_some_and(|v| v != id) {
        return error(StatusCode::BAD_REQUEST, "video_id in body does not match the path");
    }
    let meta = VideoMeta { video_id: id, duration_s: body.duration_s, genre: body.genre, title: body.title };
    let registered = {
        let meta = meta.clone();
        blocking(move || store.register_video(&meta)).await
    };
    match registered {
        Ok(Registration::Created) => (StatusCode::CREATED, Json(meta)).into_response(),
        Ok(_) => (StatusCode::OK, Json(meta)).into_response(),
        Err(e) => store_error(e),
    }
}

/// Decodes a body holding one record or an array of records.
fn decode_batch(body: &[u8]) -> Result<Vec<InteractionEvent>, Response> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| error(StatusCode::BAD_REQUEST, format!("body is not valid JSON: {e}")))?;
    let items = match value {
        Value::Array(items) => items,
        single @ Value::Object(_) => vec![single],
        _ => return Err(error(StatusCode::BAD_REQUEST, "body must be an event object or an array of events")),
    };
    if items.len() > MAX_BATCH {
        return Err(error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("batch of {} events exceeds the limit of {MAX_BATCH}", items.len()),
        ));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(index, item)| {
            parse_event_value(item).map_err(|e| {
                (StatusCode::BAD_REQUEST, Json(json!({ "error": e.to_string(), "index": index }))).into_response()
            })
        })
        .collect()
}

async fn post_events(State(store): State<SharedStore>, body: Bytes) -> Response {
    let events = match decode_batch(&body) {
        Ok(events) => events,
        Err(resp) => return resp,
    };
    match blocking(move || store.append_events(&events)).await {
        Ok(outcome) => (
            StatusCode::ACCEPTED,
            Json(json!({ "accepted": outcome.accepted, "duplicates": outcome.duplicates })),
        )
            .into_response(),
        Err(e) => store_error(e),
    }
}

/// Snapshot of a registered video, or the 404 response.
fn registered(store: &EventStore, id: &str) -> Result<(VideoMeta, Vec<InteractionEvent>), Response> {
    match store.snapshot(id) {
        Some(VideoSnapshot { meta: Some(meta), events }) => Ok((meta, events)),
        _ => Err(error(StatusCode::NOT_FOUND, format!("unknown video {id:?}"))),
    }
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum SeriesKindParam {
    Raw,
    #[default]
    Smoothed,
}

#[derive(Deserialize)]
struct SeriesQuery {
    #[serde(default)]
    kind: SeriesKindParam,
    window_s: Option<u32>,
}

async fn get_series(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    Query(q): Query<SeriesQuery>,
) -> Response {
    let (meta, events) = match registered(&store, &id) {
        Ok(v) => v,
        Err(resp) => return resp,
    };
    let built = match q.kind {
        SeriesKindParam::Raw => series::build_replay_series(&events, &meta).map_err(AnalysisError::from),
        SeriesKindParam::Smoothed => analysis::interest_series(&events, &meta, q.window_s),
    };
    match built {
        Ok(s) => ([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], s.to_tsv()).into_response(),
        Err(e) => analysis_error(e),
    }
}

#[derive(Deserialize)]
pub struct KeyframeQuery {
    pub window_s: Option<u32>,
    pub min_value: Option<f64>,
    pub max_peaks: Option<usize>,
    pub candidate_window_s: Option<u32>,
}

impl KeyframeQuery {
    pub fn params(&self) -> AnalysisParams {
        AnalysisParams {
            window_s: self.window_s,
            min_value: self.min_value.unwrap_or(0.0),
            max_peaks: self.max_peaks,
            candidate_window_s: self.candidate_window_s.unwrap_or(DEFAULT_CANDIDATE_WINDOW_S),
        }
    }
}

async fn get_keyframes(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    Query(q): Query<KeyframeQuery>,
) -> Response {
    let (meta, events) = match registered(&store, &id) {
        Ok(v) => v,
        Err(resp) => return resp,
    };
    match analysis::analyze_keyframes(&events, &meta, &q.params()) {
        Ok(result) => (
            [(header::CONTENT_TYPE, "application/json")],
            analysis::keyframes_json(&meta.video_id, &result),
        )
            .into_response(),
        Err(e) if e.is_no_peaks() => no_peaks(),
        Err(e) => analysis_error(e),
    }
}

async fn get_thumbnail(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    Query(q): Query<KeyframeQuery>,
) -> Response {
    let (meta, events) = match registered(&store, &id) {
        Ok(v) => v,
        Err(resp) => return resp,
    };
    let params = AnalysisParams { max_peaks: None, ..q.params() };
    match analysis::analyze_keyframes(&events, &meta, &params) {
        Ok(result) => {
            let top = peaks::select_thumbnail(&result.peaks).expect("non-empty result");
            let window = result.windows[0];
            Json(json!({
                "video_id": meta.video_id,
                "thumbnail_time_s": top.time_s,
                "value": top.value,
                "window": [window.start_s, window.end_s],
            }))
            .into_response()
        }
        Err(e) if e.is_no_peaks() => no_peaks(),
        Err(e) => analysis_error(e),
    }
}
