//! REST surface. Handlers are thin: they parse parameters, call [`Hub`] and
//! serialize the result. All ranges are half-open `[from, to)` in ms.

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use super::{Clock, Hub, HubError, RangeQuery};
use crate::metrics::TimeWindow;
use crate::registry::GroupRegistry;

#[derive(Clone)]
pub struct AppState {
    pub hub: Arc<Hub>,
    /// Supplies the default `to` when a query leaves it out.
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

pub struct ApiError(StatusCode, &'static str, String);

impl From<HubError> for ApiError {
    fn from(e: HubError) -> Self {
        let msg = e.to_string();
        match e {
            HubError::UnknownGroup(_) => ApiError(StatusCode::NOT_FOUND, "unknown_group", msg),
            HubError::BadRange(_) => ApiError(StatusCode::BAD_REQUEST, "bad_range", msg),
            HubError::BadRequest(_) => ApiError(StatusCode::BAD_REQUEST, "bad_request", msg),
            HubError::Registry(_) => ApiError(StatusCode::BAD_REQUEST, "bad_registry", msg),
            HubError::Metrics(_) => {
                ApiError(StatusCode::UNPROCESSABLE_ENTITY, "not_computable", msg)
            }
            HubError::Io(_) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, "store", msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.0,
            Json(ErrorBody {
                error: self.1,
                message: self.2,
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_range(params: &HashMap<String, String>) -> Result<RangeQuery, HubError> {
    let field = |name: &str| -> Result<Option<i64>, HubError> {
        params
            .get(name)
            .map(|v| {
                v.parse::<i64>()
                    .map_err(|_| HubError::BadRange(format!("{name}={v:?} is not an integer")))
            })
            .transpose()
    };
    Ok(RangeQuery {
        from: field("from")?,
        to: field("to")?,
        window_ms: field("window_ms")?,
    })
}

fn window(st: &AppState, params: &HashMap<String, String>) -> Result<TimeWindow, HubError> {
    parse_range(params)?.resolve(st.clock.now_ms(), st.hub.config().default_window_ms)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/groups", get(groups))
        .route("/groups/{id}/volumes", get(volumes))
        .route("/groups/{id}/events", get(events))
        .route("/groups/{id}/proximity", get(proximity))
        .route("/groups/{id}/stats", get(stats))
        .route("/groups/{id}/mediator", get(mediator))
        .route("/groups/{id}/ingest", post(ingest))
        .route("/registry", post(register))
        .fallback(|| async {
            ApiError(
                StatusCode::NOT_FOUND,
                "not_found",
                "no such endpoint".into(),
            )
        })
        .with_state(state)
}

async fn groups(State(st): State<AppState>) -> Json<Vec<super::GroupSummary>> {
    Json(st.hub.groups())
}

macro_rules! range_handler {
    ($name:ident, $method:ident, $out:ty) => {
        async fn $name(
            State(st): State<AppState>,
            Path(id): Path<String>,
            Query(params): Query<HashMap<String, String>>,
        ) -> ApiResult<$out> {
            let w = window(&st, &params)?;
            Ok(Json(st.hub.$method(&id, w)?))
        }
    };
}

range_handler!(volumes, volumes, Vec<crate::signal::VolumeSample>);
range_handler!(events, events, Vec<crate::signal::SpeakingEvent>);
range_handler!(proximity, proximity, crate::proximity::ProximityGraph);
range_handler!(stats, stats, crate::metrics::WindowStats);
range_handler!(mediator, mediator, crate::metrics::MediatorState);

async fn ingest(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<super::IngestReport> {
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| HubError::BadRequest(format!("body is not JSON: {e}")))?;
    if st.hub.registry().group(&id).is_none() {
        return Err(HubError::UnknownGroup(id).into());
    }
    let hub = st.hub.clone();
    let report = tokio::task::spawn_blocking(move || hub.ingest_json(&value, Some(&id)))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(report))
}

async fn register(State(st): State<AppState>, body: Bytes) -> ApiResult<GroupRegistry> {
    let update: GroupRegistry = serde_json::from_slice(&body)
        .map_err(|e| HubError::BadRequest(format!("invalid registry: {e}")))?;
    let hub = st.hub.clone();
    let merged = tokio::task::spawn_blocking(move || hub.register(update))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(merged))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
