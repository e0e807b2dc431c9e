//! `lexrag.toml`: file settings, overridden by environment secrets and flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lexrag_core::chunker::ChunkConfig;
use lexrag_core::client::HttpClientConfig;
use lexrag_core::dataset::{reference_targets, TaskKind, DEFAULT_BASE_MODEL};
use lexrag_core::kb::DEFAULT_TOP_K;
use lexrag_core::metrics::EvalParams;
use lexrag_core::rag::DEFAULT_BUDGET_TOKENS;
use lexrag_service::ServiceConfig;
use serde::{Deserialize, Serialize};

pub const CHAT_KEY_ENV: &str = "LEXRAG_CHAT_API_KEY";
pub const EMBED_KEY_ENV: &str = "LEXRAG_EMBED_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub k: usize,
    pub mock_clients: bool,
    pub budget_tokens: usize,
    pub paths: Paths,
    pub chunk: ChunkConfig,
    pub eval: EvalParams,
    pub generation: GenerationSettings,
    pub chat: ChatSettings,
    pub embedding: EmbeddingSettings,
    pub service: ServiceConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k: DEFAULT_TOP_K,
            mock_clients: false,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            paths: Paths::default(),
            chunk: ChunkConfig::default(),
            eval: EvalParams::default(),
            generation: GenerationSettings::default(),
            chat: ChatSettings::default(),
            embedding: EmbeddingSettings::default(),
            service: ServiceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Extra system prompts, merged over the built-in ones.
    pub prompts: Option<PathBuf>,
    /// Mock chat fixtures directory.
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub targets: BTreeMap<TaskKind, usize>,
    pub items_per_call: usize,
    pub max_retries: usize,
    pub parallelism: usize,
    pub retry_backoff_ms: u64,
    pub test_fraction: f64,
    pub base_model: String,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            targets: reference_targets(),
            items_per_call: 3,
            max_retries: 2,
            parallelism: 4,
            retry_backoff_ms: 500,
            test_fraction: 0.2,
            base_model: DEFAULT_BASE_MODEL.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub temperature: f64,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: CHAT_KEY_ENV.into(),
            timeout_secs: 60,
            temperature: 0.0,
        }
    }
}

impl ChatSettings {
    pub fn http(&self) -> HttpClientConfig {
        HttpClientConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub dim: usize,
    pub batch_size: usize,
    /// Dimension of the offline hash embedder used with mock clients.
    pub mock_dim: usize,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "text-embedding-3-small".into(),
            api_key_env: EMBED_KEY_ENV.into(),
            timeout_secs: 60,
            dim: 1536,
            batch_size: 64,
            mock_dim: 256,
        }
    }
}

impl EmbeddingSettings {
    pub fn http(&self) -> HttpClientConfig {
        HttpClientConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Validation that needs every layer applied.
    pub fn validate(&self) -> Result<()> {
        self.chunk.validate()?;
        if let Err(e) = self.eval.validate() {
            bail!("invalid eval params: {e}");
        }
        let f = self.generation.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            bail!("test fraction {f} is not in (0, 1)");
        }
        Ok(())
    }
}

/// `task=n,task=n` target list.
pub fn parse_targets(spec: &str) -> Result<BTreeMap<TaskKind, usize>> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (task, n) = part
            .split_once('=')
            .with_context(|| format!("target {part:?} is not task=count"))?;
        let task: TaskKind = task.trim().parse().map_err(anyhow::Error::msg)?;
        let n: usize = n.trim().parse().with_context(|| format!("bad count in {part:?}"))?;
        out.insert(task, n);
    }
    Ok(out)
}
