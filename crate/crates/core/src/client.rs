//! Chat-completion and embedding clients.
//!
//! Both are small blocking traits so they can be driven from worker threads.
//! HTTP implementations speak the OpenAI-compatible wire shape; the mocks are
//! deterministic and need no network.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kb::EmbeddingVector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{client}: {message}")]
pub struct ClientError {
    /// Identity of the failing client.
    pub client: String,
    pub message: String,
    /// Transient failures (timeouts, 5xx, 429) may be retried.
    pub retryable: bool,
}

impl ClientError {
    pub fn transient(client: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            client: client.into(),
            message: message.into(),
            retryable: true,
        }
    }

    pub fn fatal(client: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            client: client.into(),
            message: message.into(),
            retryable: false,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
    fn identity(&self) -> String;
}

pub trait EmbeddingClient: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError>;
    fn dim(&self) -> usize;
    fn identity(&self) -> String;
}

/// First 16 hex digits of the SHA-256 of `prompt`.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    hex::encode(&digest[..8])
}

/// 64-bit FNV-1a; stable across platforms and toolchains.
pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Echoes the prompt back; used to check prompt assembly end to end.
#[derive(Debug, Clone, Default)]
pub struct EchoChatClient;

impl ChatClient for EchoChatClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        Ok(prompt.to_string())
    }

    fn identity(&self) -> String {
        "mock-echo".into()
    }
}

/// A chat client that always fails, for retry and error-path tests.
#[derive(Debug, Clone)]
pub struct FailingChatClient {
    pub retryable: bool,
}

impl ChatClient for FailingChatClient {
    fn complete(&self, _prompt: &str) -> Result<String, ClientError> {
        Err(ClientError {
            client: self.identity(),
            message: "simulated failure".into(),
            retryable: self.retryable,
        })
    }

    fn identity(&self) -> String {
        "mock-failing".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureMode {
    /// Serve fixtures when present, synthesize otherwise.
    Synthesize,
    /// Synthesize on a miss and write the response to the fixture directory.
    Record,
    /// Fixtures only; a miss is a fatal client error.
    Replay,
}

/// File-backed mock chat client.
///
/// Responses are keyed by [`prompt_hash`] and stored as `<hash>.txt` in the
/// fixture directory. Without a fixture, a response is synthesized from the
/// prompt: it returns as many `{'input', 'output'}` records as the prompt
/// requests, in a fenced single-quoted block like real model output.
#[derive(Debug, Clone)]
pub struct MockChatClient {
    fixture_dir: Option<PathBuf>,
    mode: FixtureMode,
    seed: u64,
}

impl MockChatClient {
    pub fn synthetic(seed: u64) -> Self {
        Self {
            fixture_dir: None,
            mode: FixtureMode::Synthesize,
            seed,
        }
    }

    pub fn with_fixtures(dir: impl Into<PathBuf>, mode: FixtureMode, seed: u64) -> Self {
        Self {
            fixture_dir: Some(dir.into()),
            mode,
            seed,
        }
    }

    pub fn fixture_path(&self, prompt: &str) -> Option<PathBuf> {
        self.fixture_dir
            .as_ref()
            .map(|d| d.join(format!("{}.txt", prompt_hash(prompt))))
    }

    fn synthesize(&self, prompt: &str) -> String {
        static COUNT: OnceLock<Regex> = OnceLock::new();
        static TASK: OnceLock<Regex> = OnceLock::new();
        let count_re = COUNT.get_or_init(|| Regex::new(r"Produce (\d+) records").unwrap());
        let task_re = TASK.get_or_init(|| Regex::new(r"(?m)^Task: (.+)$").unwrap());
        let n: usize = count_re
            .captures(prompt)
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(3);
        let task = task_re
            .captures(prompt)
            .map(|c| c[1].trim().to_string())
            .unwrap_or_else(|| "legal task".into());
        let context = extract_context(prompt);
        let words: Vec<&str> = context.split_whitespace().collect();
        let key = prompt_hash(prompt);
        let h = fnv1a(self.seed, prompt.as_bytes());

        let mut body = String::from("```json\n[\n");
        for i in 0..n {
            let start = if words.is_empty() {
                0
            } else {
                ((h >> (i % 8)) as usize + i * 7) % words.len()
            };
            let excerpt: Vec<&str> = words.iter().cycle().skip(start).take(12.min(words.len().max(1))).copied().collect();
            let excerpt = sanitize(&excerpt.join(" "));
            let input = format!("[{task}] question {key}-{i}: what does the provision state about {excerpt}?");
            let output = format!("According to the cited provision: {excerpt}.");
            body.push_str(&format!("  {{\n    'input': '{}',\n    'output': '{}',\n  }},\n", input, output));
        }
        body.push_str("]\n```\n");
        body
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '\'' | '"' | '\\' | '{' | '}'))
        .collect()
}

fn extract_context(prompt: &str) -> &str {
    let start = prompt.find("<context>").map(|i| i + "<context>".len());
    let end = prompt.find("</context>");
    match (start, end) {
        (Some(s), Some(e)) if s <= e => prompt[s..e].trim(),
        _ => "",
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        if let Some(path) = self.fixture_path(prompt) {
            match fs::read_to_string(&path) {
                Ok(text) => return Ok(text),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(ClientError::fatal(self.identity(), format!("{}: {e}", path.display()))),
            }
            if self.mode == FixtureMode::Replay {
                return Err(ClientError::fatal(
                    self.identity(),
                    format!("no fixture {}", path.display()),
                ));
            }
        }
        let text = self.synthesize(prompt);
        if let (FixtureMode::Record, Some(path)) = (self.mode, self.fixture_path(prompt)) {
            write_fixture(&path, &text)
                .map_err(|e| ClientError::fatal(self.identity(), format!("{}: {e}", path.display())))?;
        }
        Ok(text)
    }

    fn identity(&self) -> String {
        format!("mock-chat/{}", self.seed)
    }
}

fn write_fixture(path: &Path, text: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

/// Deterministic hashed bag-of-words embedder.
///
/// Each lowercased alphanumeric token adds ±1 to one hashed coordinate, so
/// texts with the same token multiset embed to the same vector and a text
/// with no tokens embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self { dim, seed }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0f32; self.dim];
        let lowered = text.to_lowercase();
        for token in lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(self.seed, token.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            values[idx] += sign;
        }
        EmbeddingVector::new(values)
    }
}

impl EmbeddingClient for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> String {
        format!("mock-hash-embed/{}/{}", self.dim, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpClientConfig {
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

fn agent(timeout_secs: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post_json(
    agent: &ureq::Agent,
    identity: &str,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, ClientError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req
        .send(serde_json::to_vec(body).expect("json body"))
        .map_err(|e| ClientError::transient(identity, e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| ClientError::transient(identity, e.to_string()))?;
    if !(200..300).contains(&status) {
        let message = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
        return Err(if status == 429 || status >= 500 {
            ClientError::transient(identity, message)
        } else {
            ClientError::fatal(identity, message)
        });
    }
    serde_json::from_str(&text).map_err(|e| ClientError::fatal(identity, format!("invalid JSON response: {e}")))
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

/// Chat-completion client: `POST {endpoint}/chat/completions`.
#[derive(Debug)]
pub struct HttpChatClient {
    cfg: HttpClientConfig,
    temperature: f64,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    /// Reads the API key from `cfg.api_key_env`; a missing key sends no auth header.
    pub fn new(cfg: HttpClientConfig, temperature: f64) -> Self {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, temperature, api_key)
    }

    pub fn with_key(cfg: HttpClientConfig, temperature: f64, api_key: Option<String>) -> Self {
        let agent = agent(cfg.timeout_secs);
        Self {
            cfg,
            temperature,
            api_key,
            agent,
        }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let id = self.identity();
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let url = join_url(&self.cfg.endpoint, "chat/completions");
        let v = post_json(&self.agent, &id, &url, self.api_key.as_deref(), &body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ClientError::fatal(id, "response has no choices[0].message.content"))
    }

    fn identity(&self) -> String {
        format!("http-chat/{}", self.cfg.model)
    }
}

/// Embedding client: `POST {endpoint}/embeddings` with `input` as a string batch.
#[derive(Debug)]
pub struct HttpEmbeddingClient {
    cfg: HttpClientConfig,
    dim: usize,
    batch_size: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbeddingClient {
    pub fn new(cfg: HttpClientConfig, dim: usize, batch_size: usize) -> Self {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, dim, batch_size, api_key)
    }

    pub fn with_key(cfg: HttpClientConfig, dim: usize, batch_size: usize, api_key: Option<String>) -> Self {
        let agent = agent(cfg.timeout_secs);
        Self {
            cfg,
            dim,
            batch_size: batch_size.max(1),
            api_key,
            agent,
        }
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        let id = self.identity();
        let body = json!({ "model": self.cfg.model, "input": batch });
        let url = join_url(&self.cfg.endpoint, "embeddings");
        let v = post_json(&self.agent, &id, &url, self.api_key.as_deref(), &body)?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::fatal(&id, "response has no data array"))?;
        if data.len() != batch.len() {
            return Err(ClientError::fatal(
                &id,
                format!("expected {} embeddings, got {}", batch.len(), data.len()),
            ));
        }
        let mut items: Vec<(usize, EmbeddingVector)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map(|i| i as usize).unwrap_or(pos);
            let values: Vec<f32> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| ClientError::fatal(&id, "item has no embedding"))?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32))
                .collect::<Option<_>>()
                .ok_or_else(|| ClientError::fatal(&id, "non-numeric embedding value"))?;
            if values.len() != self.dim {
                return Err(ClientError::fatal(
                    &id,
                    format!("embedding dim {} != configured {}", values.len(), self.dim),
                ));
            }
            items.push((index, EmbeddingVector::new(values)));
        }
        items.sort_by_key(|(i, _)| *i);
        Ok(items.into_iter().map(|(_, v)| v).collect())
    }
}

impl EmbeddingClient for HttpEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.embed_batch(batch)?);
        }
        Ok(out)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> String {
        format!("http-embed/{}", self.cfg.model)
    }
}
