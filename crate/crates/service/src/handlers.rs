use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lexrag_core::chunker::chunk_segments;
use lexrag_core::corpus::{render_document, render_segment, SourceRef};
use lexrag_core::kb::{index as build_index, KbError};
use lexrag_core::loader::{load_corpus, parse_documents, LoadError, RawDocument};
use lexrag_core::rag::{answer_query, QueryRequest, RagError, DEFAULT_SYSTEM_PROMPT_ID};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::{AppState, SCHEMA_VERSION};

type ApiResult<T> = Result<Json<T>, ApiError>;

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(b)| b).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

pub async fn auth(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let Some(token) = state.config.bearer_token.as_deref() else {
        return next.run(req).await;
    };
    if req.method() == Method::OPTIONS || req.uri().path() == "/api/health" {
        return next.run(req).await;
    }
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token) {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token").into_response()
    }
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let snap = state.snapshot();
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "kb_loaded": snap.kb.is_some(),
        "entries": snap.kb.as_ref().map_or(0, |kb| kb.len()),
        "kb_version": snap.version,
        "embedder_id": snap.kb.as_ref().map(|kb| kb.embedder_id().to_string()),
        "documents": snap.corpus.as_ref().map_or(0, |c| c.documents().len()),
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueryBody {
    pub text: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub system_prompt_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitBody {
    pub rank: usize,
    pub score: f64,
    #[serde(rename = "ref")]
    pub source: Option<String>,
    pub label: String,
    pub entry_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub schema_version: u32,
    pub answer: String,
    pub citations: Vec<String>,
    pub hits: Vec<HitBody>,
    pub model_id: String,
    pub latency_ms: u64,
    pub kb_version: u64,
    pub k: usize,
    pub system_prompt_id: String,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn rag_error(e: RagError) -> ApiError {
    match e {
        RagError::EmptyQuery => ApiError::new(StatusCode::BAD_REQUEST, "empty_query", e.to_string()),
        RagError::UnknownSystemPrompt(_) => ApiError::new(StatusCode::BAD_REQUEST, "unknown_system_prompt", e.to_string()),
        RagError::BudgetTooSmall { .. } => ApiError::new(StatusCode::BAD_REQUEST, "query_too_long", e.to_string()),
        RagError::NoKnowledgeBase => ApiError::new(StatusCode::CONFLICT, "no_knowledge_base", e.to_string()),
        RagError::Client(c) | RagError::Kb(KbError::Client(c)) => ApiError::upstream(c.client.clone(), c.to_string()),
        other => ApiError::internal(other.to_string()),
    }
}

pub async fn query(State(state): State<Arc<AppState>>, body: Result<Json<QueryBody>, JsonRejection>) -> ApiResult<QueryResponse> {
    let body = json_body(body)?;
    if body.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_query", "query text is empty"));
    }
    let k = body.k.unwrap_or(state.config.default_k);
    if k > state.config.max_k {
        return Err(ApiError::bad_request(format!("k must be at most {}", state.config.max_k)));
    }
    let snap = state.snapshot();
    if k > 0 && snap.kb.is_none() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no_knowledge_base", "no knowledge base has been indexed"));
    }
    let system_prompt_id = body.system_prompt_id.unwrap_or_else(|| DEFAULT_SYSTEM_PROMPT_ID.to_string());
    let request = QueryRequest {
        text: body.text,
        k,
        system_prompt_id: system_prompt_id.clone(),
        model_id: String::new(),
    };
    let worker_state = Arc::clone(&state);
    let worker_snap = Arc::clone(&snap);
    let answer = blocking(move || {
        answer_query(
            &request,
            worker_snap.kb.as_ref(),
            worker_state.embed.as_ref(),
            worker_state.gen.as_ref(),
            &worker_state.rag,
        )
    })
    .await?
    .map_err(rag_error)?;

    Ok(Json(QueryResponse {
        schema_version: SCHEMA_VERSION,
        citations: answer.citations.iter().map(ToString::to_string).collect(),
        hits: answer
            .hits
            .iter()
            .map(|h| HitBody {
                rank: h.rank,
                score: round6(h.score),
                source: h.chunk.source.as_ref().map(ToString::to_string),
                label: h.chunk.source.as_ref().map_or_else(|| h.chunk.id.clone(), SourceRef::label),
                entry_id: h.entry_id.clone(),
                text: h.chunk.text.clone(),
            })
            .collect(),
        answer: answer.text,
        model_id: answer.model_id,
        latency_ms: answer.latency_ms,
        kb_version: snap.version,
        k,
        system_prompt_id,
    }))
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct IndexRequest {
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    #[serde(default)]
    pub documents: Option<Vec<RawDocument>>,
}

fn load_error(e: LoadError) -> ApiError {
    match e {
        LoadError::Parse(diagnostics) => ApiError {
            diagnostics,
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "parse_failed", "one or more documents failed to parse")
        },
        LoadError::Corpus(c) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", c.to_string()),
        other => ApiError::bad_request(other.to_string()),
    }
}

pub async fn index(State(state): State<Arc<AppState>>, body: Result<Json<IndexRequest>, JsonRejection>) -> ApiResult<Value> {
    let body = json_body(body)?;
    let _writer = state.index_lock.lock().await;
    let worker_state = Arc::clone(&state);
    let (kb, corpus, warnings) = blocking(move || -> Result<_, ApiError> {
        let corpus = match (body.corpus_path, body.documents) {
            (Some(path), None) => load_corpus(&path).map_err(load_error)?,
            (None, Some(docs)) if !docs.is_empty() => parse_documents(&docs).map_err(load_error)?,
            _ => return Err(ApiError::bad_request("provide exactly one of corpus_path or a non-empty documents list")),
        };
        let chunks = chunk_segments(&corpus.leaf_segments(), worker_state.config.max_segment_tokens)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let outcome = build_index(&chunks, worker_state.embed.as_ref()).map_err(|e| match e {
            KbError::Client(c) => ApiError::upstream(c.client.clone(), c.to_string()),
            KbError::NoChunks | KbError::AllVectorsZero => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "nothing_to_index", e.to_string())
            }
            other => ApiError::internal(other.to_string()),
        })?;
        if let Some(path) = &worker_state.config.kb_path {
            outcome.kb.save(path).map_err(|e| ApiError::internal(format!("saving {}: {e}", path.display())))?;
        }
        Ok((outcome.kb, corpus, outcome.warnings))
    })
    .await??;

    let (entries, dim, embedder_id, documents) = (kb.len(), kb.dim(), kb.embedder_id().to_string(), corpus.documents().len());
    let version = state.install(Some(kb), Some(corpus));
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "entries": entries,
        "dim": dim,
        "embedder_id": embedder_id,
        "documents": documents,
        "kb_version": version,
        "warnings": warnings,
    })))
}

pub async fn corpus(State(state): State<Arc<AppState>>, Path(reference): Path<String>) -> ApiResult<Value> {
    let source: SourceRef = reference
        .parse()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_ref", format!("{e}")))?;
    let snap = state.snapshot();
    let unknown = || ApiError::new(StatusCode::NOT_FOUND, "unknown_ref", format!("no unit {source}"));
    let corpus = snap.corpus.as_ref().ok_or_else(unknown)?;
    let (level, text, rendered) = match source.level() {
        None => {
            let doc = corpus.document(&source.regulation_id).ok_or_else(unknown)?;
            (None, doc.body_text(), render_document(doc))
        }
        Some(_) => {
            let seg = corpus.resolve(&source).map_err(|_| unknown())?;
            let rendered = render_segment(corpus, seg).map_err(|_| unknown())?;
            (Some(seg.level), seg.text.clone(), rendered)
        }
    };
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "ref": source.to_string(),
        "label": source.label(),
        "level": level,
        "text": text,
        "rendered": rendered,
    })))
}
