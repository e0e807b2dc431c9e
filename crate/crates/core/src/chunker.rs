//! Fixed-size token windows over text, and segment-to-chunk wrapping.
//!
//! A token is a whitespace-delimited word.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Segment, SourceRef};

pub const DEFAULT_CHUNK_SIZE: usize = 512;
pub const DEFAULT_CHUNK_OVERLAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkError {
    #[error("invalid chunk config: size={size} overlap={overlap} (need size > 0 and overlap < size)")]
    InvalidConfig { size: usize, overlap: usize },
    #[error("text has no tokens")]
    EmptyText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_CHUNK_OVERLAP,
        }
    }
}

impl ChunkConfig {
    pub fn new(size: usize, overlap: usize) -> Result<Self, ChunkError> {
        let cfg = Self { size, overlap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.size == 0 || self.overlap >= self.size {
            return Err(ChunkError::InvalidConfig {
                size: self.size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub seq: usize,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceRef>,
    pub token_count: usize,
    pub text: String,
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Window start offsets: `i * stride` for every `i` with a start inside the text.
fn window_starts(n_tokens: usize, cfg: &ChunkConfig) -> impl Iterator<Item = usize> {
    (0..n_tokens).step_by(cfg.stride())
}

fn windows<'t>(tokens: &'t [&'t str], cfg: &ChunkConfig) -> Vec<&'t [&'t str]> {
    window_starts(tokens.len(), cfg)
        .map(|start| &tokens[start..(start + cfg.size).min(tokens.len())])
        .collect()
}

/// Splits `text` into windows of `cfg.size` tokens advancing by `size - overlap`.
pub fn chunk_text(text: &str, cfg: &ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    chunk_text_with_prefix("chunk", text, cfg)
}

/// [`chunk_text`] with ids of the form `{prefix}-{seq}`.
pub fn chunk_text_with_prefix(prefix: &str, text: &str, cfg: &ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    cfg.validate()?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(ChunkError::EmptyText);
    }
    Ok(windows(&tokens, cfg)
        .into_iter()
        .enumerate()
        .map(|(seq, window)| Chunk {
            id: format!("{prefix}-{seq}"),
            seq,
            source: None,
            token_count: window.len(),
            text: window.join(" "),
        })
        .collect())
}

/// Wraps segments as chunks, sub-chunking (overlap 0) any segment longer
/// than `max_size` tokens. Every sub-chunk inherits its segment's reference.
pub fn chunk_segments(segments: &[Segment], max_size: usize) -> Result<Vec<Chunk>, ChunkError> {
    let cfg = ChunkConfig::new(max_size, 0)?;
    let mut out = Vec::new();
    for seg in segments {
        let tokens: Vec<&str> = seg.text.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let base = seg.source.to_string();
        let pieces = windows(&tokens, &cfg);
        let split = pieces.len() > 1;
        for (part, window) in pieces.into_iter().enumerate() {
            let seq = out.len();
            let id = if split {
                format!("{base}#{part}")
            } else {
                base.clone()
            };
            out.push(Chunk {
                id,
                seq,
                source: Some(seg.source.clone()),
                token_count: window.len(),
                text: window.join(" "),
            });
        }
    }
    Ok(out)
}

/// Fixed-size windows over each document body, tagged with the document reference.
pub fn chunk_corpus(corpus: &Corpus, cfg: &ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    cfg.validate()?;
    let mut out: Vec<Chunk> = Vec::new();
    for doc in corpus.documents() {
        let body = doc.body_text();
        let chunks = match chunk_text_with_prefix(&doc.id, &body, cfg) {
            Ok(c) => c,
            Err(ChunkError::EmptyText) => continue,
            Err(e) => return Err(e),
        };
        for mut c in chunks {
            c.seq = out.len();
            c.source = Some(SourceRef::document(&doc.id));
            out.push(c);
        }
    }
    Ok(out)
}

/// JSONL dump, one chunk per line.
pub fn chunks_to_jsonl(chunks: &[Chunk]) -> String {
    let mut out = String::new();
    for c in chunks {
        out.push_str(&serde_json::to_string(c).expect("chunk serializes"));
        out.push('\n');
    }
    out
}
