//! JSON-over-HTTP front end. Writes go through one mutex-guarded
//! [`Service`]; reads are served from the state published after the last write.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use modwatch_core::models::ModelKind;
use modwatch_core::YearMonth;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::service::{dossier, LabelRequest, Service};
use crate::source::CommunitySource;
use crate::state::{ServiceState, Status};
use crate::ServiceError;

pub const TOKEN_HEADER: &str = "x-modwatch-token";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Conflict(_) | Self::NoModel => StatusCode::CONFLICT,
            Self::SingleClass(_) | Self::Model(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Unauthorized => StatusCode::UNAUTHORIZED,
            Self::Replay(_) | Self::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        (
            status,
            Json(json!({"code": self.code(), "message": self.to_string()})),
        )
            .into_response()
    }
}

struct App<S> {
    writer: Mutex<Service<S>>,
    reader: RwLock<Arc<ServiceState>>,
    source: Arc<S>,
    token: Option<String>,
}

impl<S: CommunitySource + 'static> App<S> {
    fn snapshot(&self) -> Arc<ServiceState> {
        self.reader
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    fn authorize(&self, headers: &HeaderMap) -> Result<(), ServiceError> {
        match &self.token {
            Some(t)
                if headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) != Some(t.as_str()) =>
            {
                Err(ServiceError::Unauthorized)
            }
            _ => Ok(()),
        }
    }
}

/// Run `f` against the writer off the async runtime, then publish the new state.
async fn write<S, T, F>(app: Arc<App<S>>, f: F) -> Result<T, ServiceError>
where
    S: CommunitySource + 'static,
    T: Send + 'static,
    F: FnOnce(&mut Service<S>) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let mut service = app.writer.lock().map_err(|_| {
            ServiceError::Storage("writer poisoned by an earlier panic; restart to replay".into())
        })?;
        let out = f(&mut service);
        *app.reader.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(service.state().clone());
        out
    })
    .await
    .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

pub fn router<S: CommunitySource + 'static>(service: Service<S>, token: Option<String>) -> Router {
    let app = Arc::new(App {
        reader: RwLock::new(Arc::new(service.state().clone())),
        source: service.source().clone(),
        writer: Mutex::new(service),
        token,
    });
    Router::new()
        .route("/flags", get(flags::<S>))
        .route("/communities/{name}", get(community::<S>))
        .route("/labels", post(labels::<S>))
        .route("/retrain", post(retrain::<S>))
        .route("/flag-cycle", post(flag_cycle::<S>))
        .route("/model", get(model::<S>))
        .route("/metrics", get(metrics::<S>))
        .fallback(|| async { ServiceError::NotFound("no such endpoint".into()) })
        .with_state(app)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

fn month_param(q: &HashMap<String, String>) -> Result<Option<YearMonth>, ServiceError> {
    q.get("month")
        .map(|m| {
            m.parse()
                .map_err(|e| ServiceError::BadRequest(format!("month {m:?}: {e}")))
        })
        .transpose()
}

async fn flags<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let status = match q.get("status").map(String::as_str) {
        None => Some(Status::Pending),
        Some("all") => None,
        Some(s) => Some(s.parse()?),
    };
    let state = app.snapshot();
    Ok(Json(state.items_with(status)).into_response())
}

async fn community<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let month = month_param(&q)?;
    let state = app.snapshot();
    let source = app.source.clone();
    let d = tokio::task::spawn_blocking(move || dossier(&state, source.as_ref(), &name, month))
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))??;
    Ok(Json(d).into_response())
}

async fn labels<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
    headers: HeaderMap,
    payload: Result<Json<LabelRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    app.authorize(&headers)?;
    let req = body(payload)?;
    let out = write(app, move |s| s.submit_label(req, Utc::now())).await?;
    Ok(Json(out).into_response())
}

async fn retrain<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    app.authorize(&headers)?;
    let out = write(app, |s| s.retrain(Utc::now())).await?;
    Ok(Json(out).into_response())
}

#[derive(Debug, Deserialize)]
struct FlagCycleRequest {
    month: YearMonth,
}

async fn flag_cycle<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
    headers: HeaderMap,
    payload: Result<Json<FlagCycleRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    app.authorize(&headers)?;
    let req = body(payload)?;
    let items = write(app, move |s| s.flag_cycle(req.month, Utc::now())).await?;
    Ok(Json(items).into_response())
}

#[derive(Debug, Serialize)]
struct VersionSummary {
    version: u32,
    hash: String,
    training_size: usize,
}

#[derive(Debug, Serialize)]
struct ModelInfo {
    version: u32,
    hash: String,
    kind: ModelKind,
    threshold: f64,
    training_size: usize,
    queued_rows: usize,
    importances: BTreeMap<String, f64>,
    versions: Vec<VersionSummary>,
}

async fn model<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
) -> Result<Response, ServiceError> {
    let state = app.snapshot();
    let current = state.current_model().ok_or(ServiceError::NoModel)?;
    Ok(Json(ModelInfo {
        version: current.version,
        hash: current.hash.clone(),
        kind: current.artifact.kind,
        threshold: state.config.threshold,
        training_size: current.training_size,
        queued_rows: state.queue.len(),
        importances: current.artifact.importances.clone(),
        versions: state
            .models
            .iter()
            .map(|m| VersionSummary {
                version: m.version,
                hash: m.hash.clone(),
                training_size: m.training_size,
            })
            .collect(),
    })
    .into_response())
}

async fn metrics<S: CommunitySource + 'static>(
    State(app): State<Arc<App<S>>>,
) -> Json<crate::state::Metrics> {
    Json(app.snapshot().metrics())
}
