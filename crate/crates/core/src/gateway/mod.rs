//! HTTP service over a file-backed store.

mod api;
mod jobs;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Clock, SessionError, SystemClock};

pub use api::{router, AppState};
pub use jobs::{JobKind, JobRecord, JobStatus};
pub use store::Store;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("store document {0} is corrupt")]
    StoreCorrupt(PathBuf),
    #[error("i/o error: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::PortInUse(_) => "PORT_IN_USE",
            GatewayError::StoreCorrupt(_) => "STORE_CORRUPT",
            GatewayError::Io(_) => "IO_ERROR",
        }
    }
}

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into(), details: serde_json::Value::Null }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(404, &format!("{}_NOT_FOUND", what.to_uppercase()), format!("no {what} with id {id}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "INVALID_REQUEST", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            _ if e.is_limit() => 409,
            SessionError::NoCurrentPlan | SessionError::NotUnsolvable => 409,
            SessionError::DemoNotBuilt(_) => 404,
            SessionError::PlannerResourceLimit => 503,
            _ => 400,
        };
        let details = match &e {
            SessionError::QuestionTooLarge { size, limit } => serde_json::json!({ "size": size, "limit": limit }),
            SessionError::IterationLimit(max) => serde_json::json!({ "max_iterations": max }),
            SessionError::NotUnsatisfied(id) | SessionError::NotSelected(id) | SessionError::UnknownProperty(id) => {
                serde_json::json!({ "property": id })
            }
            _ => serde_json::Value::Null,
        };
        ApiError { status, code: e.code().to_string(), message: e.to_string(), details }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError::new(500, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub store: PathBuf,
    pub host: String,
    pub port: u16,
    /// Directory with the web UI bundle, served at `/`.
    pub web_root: Option<PathBuf>,
    pub workers: usize,
    /// Queued jobs beyond this count are refused with 503.
    pub backlog: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            store: PathBuf::from("planspace-store"),
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            web_root: None,
            workers: 2,
            backlog: 64,
        }
    }
}

/// Opens the store and binds the port; both failures are reported before
/// any request is served.
pub async fn bind(config: &ServeConfig) -> Result<(tokio::net::TcpListener, AppState), GatewayError> {
    let store = Store::open(&config.store)?;
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| GatewayError::Io(format!("bad address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => GatewayError::PortInUse(config.port),
        _ => GatewayError::Io(e.to_string()),
    })?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let state = AppState::new(store, clock, config.workers, config.backlog);
    Ok((listener, state))
}

pub async fn serve(config: ServeConfig) -> Result<(), GatewayError> {
    let (listener, state) = bind(&config).await?;
    let app = router(state, config.web_root.as_deref());
    axum::serve(listener, app).await.map_err(|e| GatewayError::Io(e.to_string()))
}
