//! Query orchestration: embed, retrieve, assemble a budgeted prompt, generate.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::token_count;
use crate::client::{ChatClient, ClientError, EmbeddingClient};
use crate::corpus::SourceRef;
use crate::kb::{KbError, KnowledgeBase, RetrievalHit};

pub const DEFAULT_BUDGET_TOKENS: usize = 2048;
pub const DEFAULT_SYSTEM_PROMPT_ID: &str = "legal_assistant";

const BUILTIN_PROMPTS: &str = include_str!("../config/prompts.toml");

#[derive(Debug, Error)]
pub enum RagError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("unknown system prompt {0:?}")]
    UnknownSystemPrompt(String),
    #[error("budget of {budget} tokens is smaller than system + user ({needed})")]
    BudgetTooSmall { needed: usize, budget: usize },
    #[error("no knowledge base loaded")]
    NoKnowledgeBase,
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("invalid prompts file: {0}")]
    Prompts(String),
}

/// System prompts keyed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    prompts: BTreeMap<String, String>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::from_toml_str(BUILTIN_PROMPTS).expect("built-in prompts parse")
    }
}

impl PromptLibrary {
    pub fn from_toml_str(text: &str) -> Result<Self, RagError> {
        let prompts: BTreeMap<String, String> = toml::from_str(text).map_err(|e| RagError::Prompts(e.to_string()))?;
        let prompts = prompts.into_iter().map(|(k, v)| (k, v.trim().to_string())).collect();
        Ok(Self { prompts })
    }

    /// Built-in prompts overlaid with the entries of a TOML file.
    pub fn with_overrides(path: &Path) -> Result<Self, RagError> {
        let text = fs::read_to_string(path).map_err(|e| RagError::Prompts(format!("{}: {e}", path.display())))?;
        let mut lib = Self::default();
        lib.prompts.extend(Self::from_toml_str(&text)?.prompts);
        Ok(lib)
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.prompts.get(id).map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.prompts.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub text: String,
    /// `0` disables retrieval.
    pub k: usize,
    pub system_prompt_id: String,
    pub model_id: String,
}

impl QueryRequest {
    pub fn new(text: impl Into<String>, k: usize) -> Self {
        Self {
            text: text.into(),
            k,
            system_prompt_id: DEFAULT_SYSTEM_PROMPT_ID.into(),
            model_id: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub rank: usize,
    /// Canonical reference, or the chunk id when the chunk has none.
    pub label: String,
    #[serde(rename = "ref")]
    pub source: Option<SourceRef>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub system: String,
    pub context_blocks: Vec<ContextBlock>,
    pub user: String,
    /// Whitespace tokens of system, user and block texts.
    pub token_estimate: usize,
}

impl AssembledPrompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.system);
        out.push_str("\n\n### Context\n");
        for b in &self.context_blocks {
            out.push_str(&format!("[{}] {}\n{}\n\n", b.rank, b.label, b.text));
        }
        out.push_str("### Question\n");
        out.push_str(&self.user);
        out.push('\n');
        out
    }

    pub fn citations(&self) -> Vec<SourceRef> {
        let mut out: Vec<SourceRef> = Vec::new();
        for b in &self.context_blocks {
            if let Some(r) = &b.source {
                if !out.contains(r) {
                    out.push(r.clone());
                }
            }
        }
        out
    }
}

/// Adds hits in rank order until the next block would exceed `budget_tokens`;
/// that block and all lower-ranked ones are dropped whole.
pub fn assemble_prompt(system: &str, user: &str, hits: &[RetrievalHit], budget_tokens: usize) -> Result<AssembledPrompt, RagError> {
    let base = token_count(system) + token_count(user);
    if base > budget_tokens {
        return Err(RagError::BudgetTooSmall {
            needed: base,
            budget: budget_tokens,
        });
    }
    let mut ordered: Vec<&RetrievalHit> = hits.iter().collect();
    ordered.sort_by_key(|h| h.rank);
    let mut used = base;
    let mut blocks = Vec::new();
    for hit in ordered {
        let cost = token_count(&hit.chunk.text);
        if used + cost > budget_tokens {
            break;
        }
        used += cost;
        blocks.push(ContextBlock {
            rank: hit.rank,
            label: hit
                .chunk
                .source
                .as_ref()
                .map(SourceRef::label)
                .unwrap_or_else(|| hit.chunk.id.clone()),
            source: hit.chunk.source.clone(),
            text: hit.chunk.text.clone(),
        });
    }
    Ok(AssembledPrompt {
        system: system.to_string(),
        context_blocks: blocks,
        user: user.to_string(),
        token_estimate: used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub citations: Vec<SourceRef>,
    pub hits: Vec<RetrievalHit>,
    pub prompt: AssembledPrompt,
    pub model_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RagConfig {
    pub budget_tokens: usize,
    pub prompts: PromptLibrary,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self {
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            prompts: PromptLibrary::default(),
        }
    }
}

/// Runs one query. `kb` may be `None` only when `request.k == 0`.
pub fn answer_query(
    request: &QueryRequest,
    kb: Option<&KnowledgeBase>,
    embed: &dyn EmbeddingClient,
    gen: &dyn ChatClient,
    cfg: &RagConfig,
) -> Result<Answer, RagError> {
    let started = Instant::now();
    let user = request.text.trim();
    if user.is_empty() {
        return Err(RagError::EmptyQuery);
    }
    let system = cfg
        .prompts
        .get(&request.system_prompt_id)
        .ok_or_else(|| RagError::UnknownSystemPrompt(request.system_prompt_id.clone()))?;

    let hits = if request.k == 0 {
        Vec::new()
    } else {
        let kb = kb.ok_or(RagError::NoKnowledgeBase)?;
        let mut vectors = embed.embed(&[user.to_string()])?;
        if vectors.len() != 1 {
            return Err(ClientError::fatal(embed.identity(), format!("expected 1 vector, got {}", vectors.len())).into());
        }
        let query = vectors.remove(0);
        if query.norm() == 0.0 {
            Vec::new()
        } else {
            kb.search_topk(&query, request.k)?
        }
    };

    let prompt = assemble_prompt(system, user, &hits, cfg.budget_tokens)?;
    let text = gen.complete(&prompt.render())?;
    let model_id = if request.model_id.is_empty() {
        gen.identity()
    } else {
        request.model_id.clone()
    };
    Ok(Answer {
        text,
        citations: prompt.citations(),
        hits,
        prompt,
        model_id,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}
