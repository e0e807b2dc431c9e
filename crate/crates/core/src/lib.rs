//! Legal-corpus retrieval-augmented generation toolkit.
//!
//! Parses Indonesian-style statutes into addressable units, chunks them,
//! builds instruction datasets through a chat client, indexes chunks in a
//! persisted vector knowledge base, answers queries with cited context and
//! scores outputs with BLEU and METEOR.

pub mod chunker;
pub mod client;
pub mod corpus;
pub mod dataset;
pub mod kb;
pub mod loader;
pub mod metrics;
pub mod rag;

pub use chunker::{chunk_corpus, chunk_segments, chunk_text, Chunk, ChunkConfig, ChunkError};
pub use client::{
    prompt_hash, ChatClient, ClientError, EchoChatClient, EmbeddingClient, FailingChatClient, FixtureMode,
    HashEmbedder, HttpChatClient, HttpClientConfig, HttpEmbeddingClient, MockChatClient,
};
pub use corpus::{
    parse_document, render_document, render_segment, Corpus, CorpusError, DocKind, Document, Level, ParseError,
    Segment, SourceRef,
};
pub use dataset::{
    generate_dataset, split_dataset, validate_and_dedup, GenerationError, GenerationJobConfig, InstructionPair,
    TaskKind,
};
pub use kb::{cosine_similarity, index, EmbeddingVector, KbError, KnowledgeBase, RetrievalHit};
pub use metrics::{bleu, evaluate_run, meteor, EvalParams, EvalReport};
pub use rag::{answer_query, assemble_prompt, Answer, QueryRequest, RagConfig, RagError};
pub use loader::{desk_corpus, load_corpus, parse_documents, LoadError, RawDocument};
