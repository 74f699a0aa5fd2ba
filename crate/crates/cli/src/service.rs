//! JSON-over-HTTP service.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `GET /health` | | `{status, corpus_stats: {articles, chunks}}` |
//! | `POST /search` | `{query, k?, strategy?}` | `SearchResponse` |
//! | `POST /ask` | `{query}` | `AskResponse` |
//! | `POST /admin/reindex` | | `{status, corpus_stats}` |
//!
//! Errors come back as `{error}` with 400 for bad input, 503 when a model
//! provider fails, 504 on timeout and 500 otherwise.

use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hybridqa_core::engine::{CorpusStats, Engine, SearchStrategy};
use hybridqa_core::Error;

use crate::config::ServiceConfig;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

pub struct AppState {
    engine: RwLock<Arc<Engine>>,
    /// Serializes reindexing; readers never wait on it.
    reindex: tokio::sync::Mutex<()>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(engine: Engine, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            engine: RwLock::new(Arc::new(engine)),
            reindex: tokio::sync::Mutex::new(()),
            config,
        })
    }

    /// The engine current at call time. Holders keep it alive across a swap.
    pub fn engine(&self) -> Arc<Engine> {
        self.engine.read().expect("engine lock poisoned").clone()
    }

    fn swap(&self, engine: Engine) {
        *self.engine.write().expect("engine lock poisoned") = Arc::new(engine);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            e if e.is_provider_failure() => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

/// Parses a JSON body, answering 400 for anything malformed.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

/// Runs blocking engine work off the async workers, bounded by the
/// configured timeout.
async fn run<T, F>(state: &AppState, work: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(Arc<Engine>) -> Result<T, Error> + Send + 'static,
{
    let engine = state.engine();
    let timeout = Duration::from_millis(state.config.request_timeout_ms);
    match tokio::time::timeout(timeout, tokio::task::spawn_blocking(move || work(engine))).await {
        Ok(Ok(r)) => r.map_err(ApiError::from),
        Ok(Err(join)) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {join}"),
        }),
        Err(_) => Err(ApiError {
            status: StatusCode::GATEWAY_TIMEOUT,
            message: "request timed out".into(),
        }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus_stats: CorpusStats,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub strategy: SearchStrategy,
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub query: String,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        corpus_stats: state.engine().stats(),
    })
}

async fn search(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: SearchRequest = parse(&body)?;
    if req.k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let resp = run(&state, move |e| e.search(&req.query, req.k, req.strategy)).await?;
    Ok(Json(resp).into_response())
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: AskRequest = parse(&body)?;
    let resp = run(&state, move |e| e.ask(&req.query)).await?;
    Ok(Json(resp).into_response())
}

async fn reindex(State(state): State<Arc<AppState>>) -> Result<Json<Health>, ApiError> {
    let _guard = state.reindex.lock().await;
    let config = state.config.clone();
    let fresh = tokio::task::spawn_blocking(move || config.open_engine(true))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("reindex worker failed: {e}"),
        })??;
    let corpus_stats = fresh.stats();
    state.swap(fresh);
    tracing::info!(articles = corpus_stats.articles, chunks = corpus_stats.chunks, "indexes swapped");
    Ok(Json(Health {
        status: "reindexed".into(),
        corpus_stats,
    }))
}

/// One JSON log line per request, carrying the body for replay.
async fn log_requests(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let (parts, body) = req.into_parts();
    let bytes = axum::body::to_bytes(body, 16 * 1024 * 1024).await.unwrap_or_default();
    let body_text = String::from_utf8_lossy(&bytes).into_owned();
    let started = Instant::now();
    let resp = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    tracing::info!(
        target: "hybridqa::request",
        method = %method,
        path = %path,
        status = resp.status().as_u16(),
        latency_ms = started.elapsed().as_secs_f64() * 1e3,
        body = %body_text,
    );
    resp
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/search", post(search))
        .route("/ask", post(ask))
        .route("/admin/reindex", post(reindex))
        .layer(middleware::from_fn(log_requests))
        .with_state(state)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), BoxError> {
    let addr = config.listen_addr()?;
    let c = config.clone();
    let engine = tokio::task::spawn_blocking(move || c.open_engine(false)).await??;
    tracing::info!(%addr, articles = engine.stats().articles, "serving");
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(engine, config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
