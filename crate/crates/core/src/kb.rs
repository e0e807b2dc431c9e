//! Embedded chunk store with exact cosine top-k search and a checksummed
//! binary file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic        b"LKB1"
//! version      u32
//! dim          u32
//! count        u64
//! embedder_id  u32 length + UTF-8
//! created_at   i64 unix milliseconds
//! count x entry:
//!   id         u32 length + UTF-8
//!   chunk      u32 length + JSON
//!   vector     dim x f32
//! crc32        u32 over every preceding byte
//! ```

use std::cmp::Ordering;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::Chunk;
use crate::client::{ClientError, EmbeddingClient};

pub const MAGIC: &[u8; 4] = b"LKB1";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 4;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("no chunks to index")]
    NoChunks,
    #[error("every embedding was the zero vector")]
    AllVectorsZero,
    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("embedder returned {got} vectors for {expected} texts")]
    ShortBatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("corrupt knowledge base file: {0}")]
    CorruptFile(String),
    #[error("unsupported knowledge base version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
}

/// A dense vector with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn scaled(&self, factor: f32) -> Self {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }

    fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, KbError> {
    if a.dim() != b.dim() {
        return Err(KbError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(KbError::ZeroVector);
    }
    Ok((a.dot(b) / (a.norm * b.norm)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbEntry {
    pub id: String,
    pub chunk: Chunk,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    dim: usize,
    entries: Vec<KbEntry>,
    embedder_id: String,
    /// Unix milliseconds.
    created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub entry_id: String,
    pub score: f64,
    pub rank: usize,
    pub chunk: Chunk,
}

/// A chunk that was not indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexWarning {
    pub chunk_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IndexOutcome {
    pub kb: KnowledgeBase,
    pub warnings: Vec<IndexWarning>,
}

fn now_millis() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Embeds every chunk and builds a knowledge base, skipping zero vectors.
pub fn index(chunks: &[Chunk], client: &dyn EmbeddingClient) -> Result<IndexOutcome, KbError> {
    if chunks.is_empty() {
        return Err(KbError::NoChunks);
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = client.embed(&texts)?;
    if vectors.len() != chunks.len() {
        return Err(KbError::ShortBatch {
            expected: chunks.len(),
            got: vectors.len(),
        });
    }
    let dim = client.dim();
    let mut entries = Vec::with_capacity(chunks.len());
    let mut warnings = Vec::new();
    for (chunk, vector) in chunks.iter().zip(vectors) {
        if vector.dim() != dim {
            return Err(KbError::DimMismatch {
                left: vector.dim(),
                right: dim,
            });
        }
        if vector.norm() == 0.0 {
            log::warn!("skipping chunk {}: zero-norm embedding", chunk.id);
            warnings.push(IndexWarning {
                chunk_id: chunk.id.clone(),
                reason: "zero-norm embedding".into(),
            });
            continue;
        }
        entries.push(KbEntry {
            id: chunk.id.clone(),
            chunk: chunk.clone(),
            vector,
        });
    }
    if entries.is_empty() {
        return Err(KbError::AllVectorsZero);
    }
    let kb = KnowledgeBase::new(dim, entries, client.identity(), now_millis())?;
    Ok(IndexOutcome { kb, warnings })
}

/// Descending score, then ascending insertion index.
fn hit_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl KnowledgeBase {
    pub fn new(dim: usize, entries: Vec<KbEntry>, embedder_id: String, created_at: i64) -> Result<Self, KbError> {
        let mut ids = std::collections::HashSet::new();
        for e in &entries {
            if e.vector.dim() != dim {
                return Err(KbError::DimMismatch {
                    left: e.vector.dim(),
                    right: dim,
                });
            }
            if e.vector.norm() == 0.0 {
                return Err(KbError::ZeroVector);
            }
            if !ids.insert(e.id.as_str()) {
                return Err(KbError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self {
            dim,
            entries,
            embedder_id,
            created_at,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn created_at(&self) -> i64 {
        self.created_at
    }

    /// Exact top-k by cosine similarity over every entry. Ties keep insertion order.
    pub fn search_topk(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalHit>, KbError> {
        if query.dim() != self.dim {
            return Err(KbError::DimMismatch {
                left: query.dim(),
                right: self.dim,
            });
        }
        if k == 0 {
            return Err(KbError::InvalidK);
        }
        if query.norm() == 0.0 {
            return Err(KbError::ZeroVector);
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let score = (query.dot(&e.vector) / (query.norm() * e.vector.norm())).clamp(-1.0, 1.0);
                (i, score)
            })
            .collect();
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, hit_order);
            scored.truncate(k);
        }
        scored.sort_by(hit_order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(pos, (i, score))| {
                let e = &self.entries[i];
                RetrievalHit {
                    entry_id: e.id.clone(),
                    score,
                    rank: pos + 1,
                    chunk: e.chunk.clone(),
                }
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64 + self.entries.len() * (self.dim * 4 + 256));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        put_bytes(&mut buf, self.embedder_id.as_bytes());
        buf.extend_from_slice(&self.created_at.to_le_bytes());
        for e in &self.entries {
            put_bytes(&mut buf, e.id.as_bytes());
            put_bytes(&mut buf, &serde_json::to_vec(&e.chunk).expect("chunk serializes"));
            for v in e.vector.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KbError> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err(KbError::CorruptFile("bad magic".into()));
        }
        if bytes.len() < 4 + 4 + 4 + 8 + 4 + 8 + 4 {
            return Err(KbError::CorruptFile("truncated header".into()));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != stored {
            return Err(KbError::CorruptFile("checksum mismatch".into()));
        }

        let mut r = Reader { buf: payload, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(KbError::VersionMismatch { found: version });
        }
        let dim = r.u32()? as usize;
        let count = r.u64()?;
        let embedder_id = r.string()?;
        let created_at = r.i64()?;
        let min_entry = 8 + dim * 4;
        if dim == 0 || count.saturating_mul(min_entry as u64) > (payload.len() - r.pos) as u64 {
            return Err(KbError::CorruptFile("entry count exceeds file size".into()));
        }
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = r.string()?;
            let chunk: Chunk = serde_json::from_slice(r.bytes()?)
                .map_err(|e| KbError::CorruptFile(format!("chunk for {id:?}: {e}")))?;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")));
            }
            entries.push(KbEntry {
                id,
                chunk,
                vector: EmbeddingVector::new(values),
            });
        }
        if r.pos != payload.len() {
            return Err(KbError::CorruptFile("trailing bytes".into()));
        }
        Self::new(dim, entries, embedder_id, created_at).map_err(|e| KbError::CorruptFile(e.to_string()))
    }

    /// Writes atomically via a sibling temp file. Returns bytes written.
    pub fn save(&self, path: &Path) -> Result<usize, KbError> {
        let bytes = self.to_bytes();
        let tmp = path.with_extension("lkb.tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, path)?;
        Ok(bytes.len())
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], KbError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| KbError::CorruptFile("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, KbError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, KbError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn i64(&mut self) -> Result<i64, KbError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8], KbError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, KbError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| KbError::CorruptFile("invalid UTF-8".into()))
    }
}
