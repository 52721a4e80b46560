//! HTTP front end: stores scenarios, executes runs and serves their
//! trajectories byte-for-byte as the command line would export them.

pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tn_core::scenario::render_trajectory;
use tn_core::{run_simulation, Scenario, TrajectoryFormat};
use tokio::sync::Semaphore;

pub use store::{ErrorReport, RunRecord, RunStatus, Store, TrajectoryLinks};

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub port: u16,
    /// Background workers; 0 runs each simulation inside its request.
    pub workers: usize,
}

impl Config {
    /// Reads `TN_DATA_DIR`, `TN_PORT` and `TN_WORKERS`.
    pub fn from_env() -> anyhow::Result<Self> {
        let data_dir = std::env::var_os("TN_DATA_DIR").map_or_else(|| PathBuf::from("tn-data"), PathBuf::from);
        let port = match std::env::var("TN_PORT") {
            Ok(v) => v.parse()?,
            Err(_) => 8080,
        };
        let workers = match std::env::var("TN_WORKERS") {
            Ok(v) => v.parse()?,
            Err(_) => 0,
        };
        Ok(Config {
            data_dir,
            port,
            workers,
        })
    }
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    pool: Option<Arc<Semaphore>>,
}

impl AppState {
    pub fn new(store: Store, workers: usize) -> Self {
        AppState {
            store: Arc::new(store),
            pool: (workers > 0).then(|| Arc::new(Semaphore::new(workers))),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/runs", post(create_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/trajectory", get(get_trajectory))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!("internal error: {e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": { "kind": self.kind, "message": self.message } }));
        (self.status, body).into_response()
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_run(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "body is not UTF-8"))?;
    let scenario = Scenario::from_json(text)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", e.to_string()))?;

    let record = RunRecord {
        id: uuid::Uuid::new_v4().simple().to_string(),
        status: RunStatus::Queued,
        scenario,
        created_at: now(),
        completed_at: None,
        trajectory: None,
        error: None,
    };
    state.store.create(&record).map_err(ApiError::internal)?;

    let record = match &state.pool {
        None => {
            let store = state.store.clone();
            tokio::task::spawn_blocking(move || execute(&store, record))
                .await
                .map_err(ApiError::internal)?
                .map_err(ApiError::internal)?
        }
        Some(pool) => {
            let (store, pool, queued) = (state.store.clone(), pool.clone(), record.clone());
            tokio::spawn(async move {
                let Ok(_permit) = pool.acquire_owned().await else {
                    return;
                };
                let id = queued.id.clone();
                match tokio::task::spawn_blocking(move || execute(&store, queued)).await {
                    Ok(Ok(_)) => {}
                    Ok(Err(e)) => tracing::error!("run {id}: store error {e}"),
                    Err(e) => tracing::error!("run {id}: worker failed {e}"),
                }
            });
            record
        }
    };
    let status = match record.status {
        RunStatus::Queued | RunStatus::Running => StatusCode::ACCEPTED,
        _ => StatusCode::CREATED,
    };
    Ok((status, Json(json!({ "id": record.id, "status": record.status }))).into_response())
}

/// Runs the simulation and records each status transition.
fn execute(store: &Store, mut record: RunRecord) -> std::io::Result<RunRecord> {
    record.status = RunStatus::Running;
    store.append(&record)?;
    match run_simulation(&record.scenario) {
        Ok(records) => {
            for format in [TrajectoryFormat::Csv, TrajectoryFormat::Json] {
                store.put_trajectory(&record.id, format, &render_trajectory(&records, format))?;
            }
            record.status = RunStatus::Done;
            record.trajectory = Some(TrajectoryLinks {
                csv: format!("/runs/{}/trajectory?format=csv", record.id),
                json: format!("/runs/{}/trajectory?format=json", record.id),
            });
        }
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(ErrorReport {
                kind: "simulation".into(),
                message: e.to_string(),
            });
        }
    }
    record.completed_at = Some(now());
    store.append(&record)?;
    Ok(record)
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<RunRecord>, ApiError> {
    state
        .store
        .get(&id)
        .map_err(ApiError::internal)?
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no run {id}")))
}

#[derive(Debug, Deserialize)]
struct TrajectoryQuery {
    format: Option<String>,
}

async fn get_trajectory(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<TrajectoryQuery>,
) -> Result<Response, ApiError> {
    let format: TrajectoryFormat = query
        .format
        .as_deref()
        .unwrap_or("csv")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", e))?;
    let record = state
        .store
        .get(&id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no run {id}")))?;
    if record.status != RunStatus::Done {
        let status = serde_json::to_value(record.status).map_err(ApiError::internal)?;
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_done",
            format!("run {id} is {}", status.as_str().unwrap_or("pending")),
        ));
    }
    let bytes = state.store.trajectory(&id, format).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}
