//! JSON HTTP API over a swappable knowledge base.
//!
//! Queries take a snapshot of the current state once and use it end to end;
//! indexing builds a new snapshot off to the side and swaps it in whole.

mod error;
mod handlers;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use lexrag_core::chunker::ChunkConfig;
use lexrag_core::client::{ChatClient, EmbeddingClient};
use lexrag_core::kb::KnowledgeBase;
use lexrag_core::rag::RagConfig;
use lexrag_core::Corpus;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
pub use handlers::{HitBody, IndexRequest, QueryBody, QueryResponse};

/// Version of the JSON response schema, present in every body.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// When set, every route except health requires `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub default_k: usize,
    pub max_k: usize,
    /// Largest segment, in tokens, stored as one knowledge-base entry.
    pub max_segment_tokens: usize,
    /// Where to persist a freshly indexed knowledge base, if anywhere.
    pub kb_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            bearer_token: None,
            cors_origins: Vec::new(),
            default_k: lexrag_core::kb::DEFAULT_TOP_K,
            max_k: 100,
            max_segment_tokens: ChunkConfig::default().size,
            kb_path: None,
        }
    }
}

/// One immutable view of the served data.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub version: u64,
    pub kb: Option<KnowledgeBase>,
    pub corpus: Option<Corpus>,
}

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    index_lock: tokio::sync::Mutex<()>,
    next_version: AtomicU64,
    pub embed: Arc<dyn EmbeddingClient>,
    pub gen: Arc<dyn ChatClient>,
    pub rag: RagConfig,
    pub config: ServiceConfig,
}

impl AppState {
    pub fn new(config: ServiceConfig, embed: Arc<dyn EmbeddingClient>, gen: Arc<dyn ChatClient>, rag: RagConfig) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(Snapshot::default())),
            index_lock: tokio::sync::Mutex::new(()),
            next_version: AtomicU64::new(1),
            embed,
            gen,
            rag,
            config,
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }

    /// Installs a new knowledge base and corpus; returns the new version.
    pub fn install(&self, kb: Option<KnowledgeBase>, corpus: Option<Corpus>) -> u64 {
        let version = self.next_version.fetch_add(1, Ordering::SeqCst);
        let snap = Arc::new(Snapshot { version, kb, corpus });
        *self.snapshot.write().expect("snapshot lock") = snap;
        version
    }
}

fn cors(config: &ServiceConfig) -> CorsLayer {
    let origins: Vec<HeaderValue> = config.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any);
    if origins.is_empty() {
        layer.allow_origin(Any)
    } else {
        layer.allow_origin(AllowOrigin::list(origins))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let layer = cors(&state.config);
    Router::new()
        .route("/api/health", get(handlers::health))
        .route("/api/query", post(handlers::query))
        .route("/api/index", post(handlers::index))
        .route("/api/corpus/{*reference}", get(handlers::corpus))
        .fallback(handlers::not_found)
        .layer(axum::middleware::from_fn_with_state(Arc::clone(&state), handlers::auth))
        .layer(layer)
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>) -> std::io::Result<()> {
    let addr: SocketAddr = format!("{}:{}", state.config.bind, state.config.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad bind address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
