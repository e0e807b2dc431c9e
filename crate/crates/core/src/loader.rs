//! Loading statute files into a [`Corpus`], with per-document diagnostics.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_document, Corpus, CorpusError, DocKind};

/// Raw statute text with its id and kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    #[serde(default = "default_kind")]
    pub kind: DocKind,
    pub text: String,
}

fn default_kind() -> DocKind {
    DocKind::Regulation
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocDiagnostic {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no statute files (*.txt) in {0}")]
    NoFiles(PathBuf),
    #[error("{} document(s) failed to parse: {}", .0.len(), summarize(.0))]
    Parse(Vec<DocDiagnostic>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn summarize(diags: &[DocDiagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("{}: {}", d.id, d.error))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses every document, reporting all failures rather than the first.
pub fn parse_documents(raw: &[RawDocument]) -> Result<Corpus, LoadError> {
    let mut docs = Vec::new();
    let mut diags = Vec::new();
    for r in raw {
        match parse_document(&r.text, &r.id, r.kind) {
            Ok(d) => docs.push(d),
            Err(e) => diags.push(DocDiagnostic {
                id: r.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    if !diags.is_empty() {
        return Err(LoadError::Parse(diags));
    }
    Ok(Corpus::new(docs)?)
}

/// Reads `*.txt` statute files from a directory, or a single file. The file
/// stem is the document id and selects the kind via [`DocKind::from_doc_id`].
pub fn read_statutes(path: &Path) -> Result<Vec<RawDocument>, LoadError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| LoadError::Io { path: p, source }
    };
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in fs::read_dir(path).map_err(io(path))? {
            let p = entry.map_err(io(path))?.path();
            if p.extension().is_some_and(|e| e == "txt") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    if files.is_empty() {
        return Err(LoadError::NoFiles(path.to_path_buf()));
    }
    files
        .iter()
        .map(|f| {
            let id = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok(RawDocument {
                kind: DocKind::from_doc_id(&id),
                text: fs::read_to_string(f).map_err(io(f))?,
                id,
            })
        })
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<Corpus, LoadError> {
    parse_documents(&read_statutes(path)?)
}

const DESK: [(&str, &str); 4] = [
    ("PP-12-2032", include_str!("../data/statutes/PP-12-2032.txt")),
    ("PP-7-2033", include_str!("../data/statutes/PP-7-2033.txt")),
    ("PP-81-2031", include_str!("../data/statutes/PP-81-2031.txt")),
    ("UU-9-2030", include_str!("../data/statutes/UU-9-2030.txt")),
];

/// The bundled synthetic statutes (three regulations and one reference law).
pub fn desk_documents() -> Vec<RawDocument> {
    DESK.iter()
        .map(|(id, text)| RawDocument {
            id: id.to_string(),
            kind: DocKind::from_doc_id(id),
            text: text.to_string(),
        })
        .collect()
}

pub fn desk_corpus() -> Corpus {
    parse_documents(&desk_documents()).expect("bundled statutes parse")
}
