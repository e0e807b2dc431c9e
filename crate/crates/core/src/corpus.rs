//! Statute text model and parser.
//!
//! Regulations are plain UTF-8 text following Indonesian drafting markers:
//! `BAB <roman>` opens a chapter (the next non-marker line is its title),
//! `Pasal <n>` opens an article and `(<n>) ...` opens a clause inside an
//! article. Text before the first marker is front matter. Any other line
//! continues whatever unit is currently open.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefError {
    #[error("empty reference")]
    Empty,
    #[error("invalid regulation id {0:?}")]
    InvalidRegulation(String),
    #[error("invalid number {0:?} in reference")]
    InvalidNumber(String),
    #[error("clause number requires an article number")]
    ClauseWithoutArticle,
    #[error("malformed reference {0:?}")]
    Malformed(String),
}

/// Points at a regulation, one of its chapters, an article or a clause.
///
/// Canonical string form: `PP-X`, `PP-X/bab/2`, `PP-X/4`, `PP-X/4/2`
/// (a chapter may also prefix an article: `PP-X/bab/2/4/2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceRef {
    pub regulation_id: String,
    pub chapter_number: Option<u32>,
    pub article_number: Option<u32>,
    pub clause_number: Option<u32>,
}

impl SourceRef {
    pub fn document(regulation_id: impl Into<String>) -> Self {
        Self {
            regulation_id: regulation_id.into(),
            chapter_number: None,
            article_number: None,
            clause_number: None,
        }
    }

    pub fn chapter(regulation_id: impl Into<String>, chapter: u32) -> Self {
        Self {
            chapter_number: Some(chapter),
            ..Self::document(regulation_id)
        }
    }

    pub fn article(regulation_id: impl Into<String>, article: u32) -> Self {
        Self {
            article_number: Some(article),
            ..Self::document(regulation_id)
        }
    }

    pub fn clause(regulation_id: impl Into<String>, article: u32, clause: u32) -> Self {
        Self {
            article_number: Some(article),
            clause_number: Some(clause),
            ..Self::document(regulation_id)
        }
    }

    /// The hierarchy level this reference addresses, `None` for a whole document.
    pub fn level(&self) -> Option<Level> {
        if self.clause_number.is_some() {
            Some(Level::Clause)
        } else if self.article_number.is_some() {
            Some(Level::Article)
        } else if self.chapter_number.is_some() {
            Some(Level::Chapter)
        } else {
            None
        }
    }

    /// Human-readable citation, e.g. `PP-57-2021 Pasal 3 ayat (2)`.
    pub fn label(&self) -> String {
        let mut out = self.regulation_id.clone();
        if let (Some(ch), None) = (self.chapter_number, self.article_number) {
            out.push_str(&format!(" BAB {}", to_roman(ch)));
        }
        if let Some(a) = self.article_number {
            out.push_str(&format!(" Pasal {a}"));
        }
        if let Some(c) = self.clause_number {
            out.push_str(&format!(" ayat ({c})"));
        }
        out
    }

    fn validate(&self) -> Result<(), RefError> {
        if !is_valid_doc_id(&self.regulation_id) {
            return Err(RefError::InvalidRegulation(self.regulation_id.clone()));
        }
        for n in [self.chapter_number, self.article_number, self.clause_number]
            .into_iter()
            .flatten()
        {
            if n == 0 {
                return Err(RefError::InvalidNumber("0".into()));
            }
        }
        if self.clause_number.is_some() && self.article_number.is_none() {
            return Err(RefError::ClauseWithoutArticle);
        }
        Ok(())
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.regulation_id)?;
        if let Some(ch) = self.chapter_number {
            write!(f, "/bab/{ch}")?;
        }
        if let Some(a) = self.article_number {
            write!(f, "/{a}")?;
        }
        if let Some(c) = self.clause_number {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

impl FromStr for SourceRef {
    type Err = RefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(RefError::Empty);
        }
        let mut parts = s.split('/');
        let mut out = SourceRef::document(parts.next().unwrap_or_default());
        let rest: Vec<&str> = parts.collect();
        let number = |p: &str| -> Result<u32, RefError> {
            match p.parse::<u32>() {
                Ok(n) if n > 0 && p.bytes().all(|b| b.is_ascii_digit()) && !p.starts_with('0') => {
                    Ok(n)
                }
                _ => Err(RefError::InvalidNumber(p.to_string())),
            }
        };
        let mut idx = 0;
        if rest.first() == Some(&"bab") {
            let n = rest
                .get(1)
                .ok_or_else(|| RefError::Malformed(s.to_string()))?;
            out.chapter_number = Some(number(n)?);
            idx = 2;
        }
        let tail = &rest[idx..];
        match tail {
            [] => {}
            [a] => out.article_number = Some(number(a)?),
            [a, c] => {
                out.article_number = Some(number(a)?);
                out.clause_number = Some(number(c)?);
            }
            _ => return Err(RefError::Malformed(s.to_string())),
        }
        out.validate()?;
        Ok(out)
    }
}

impl Serialize for SourceRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn is_valid_doc_id(id: &str) -> bool {
    !id.is_empty() && !id.contains('/') && !id.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Chapter,
    Article,
    Clause,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chapter" => Ok(Level::Chapter),
            "article" => Ok(Level::Article),
            "clause" => Ok(Level::Clause),
            other => Err(format!("unknown level {other:?} (chapter|article|clause)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Regulation,
    ReferenceLaw,
}

impl DocKind {
    /// `UU-*` ids are reference laws; everything else is a regulation.
    pub fn from_doc_id(id: &str) -> Self {
        if id.starts_with("UU") {
            DocKind::ReferenceLaw
        } else {
            DocKind::Regulation
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub number: u32,
    /// Not expressible in the marker grammar; only set by programmatic builders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    pub preamble: String,
    pub clauses: Vec<Clause>,
}

impl Article {
    /// Preamble and clause texts joined by newlines.
    pub fn text(&self) -> String {
        let mut parts: Vec<&str> = Vec::with_capacity(self.clauses.len() + 1);
        if !self.preamble.is_empty() {
            parts.push(&self.preamble);
        }
        parts.extend(self.clauses.iter().map(|c| c.text.as_str()));
        parts.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub number: u32,
    pub title: Option<String>,
    pub articles: Vec<Article>,
    /// True when the source had no `BAB` marker and this chapter was synthesized.
    #[serde(default)]
    pub implicit: bool,
}

impl Chapter {
    pub fn text(&self) -> String {
        self.articles
            .iter()
            .map(Article::text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub doc_kind: DocKind,
    pub chapters: Vec<Chapter>,
    pub front_matter: String,
}

impl Document {
    pub fn articles(&self) -> impl Iterator<Item = (&Chapter, &Article)> {
        self.chapters
            .iter()
            .flat_map(|ch| ch.articles.iter().map(move |a| (ch, a)))
    }

    /// Body text (all chapters) as one string, chapters joined by newline.
    pub fn body_text(&self) -> String {
        self.chapters
            .iter()
            .map(Chapter::text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub level: Level,
    #[serde(rename = "ref")]
    pub source: SourceRef,
    pub text: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("input is empty")]
    EmptyInput,
    #[error("invalid document id {0:?}")]
    InvalidDocumentId(String),
    #[error("line {line}: duplicate article Pasal {number}")]
    DuplicateArticle { line: usize, number: u32 },
    #[error("line {line}: {unit} number {number} does not follow {previous}")]
    NonMonotonicNumbering {
        line: usize,
        unit: &'static str,
        number: u32,
        previous: u32,
    },
    #[error("line {line}: invalid chapter numeral {numeral:?}")]
    InvalidChapterNumeral { line: usize, numeral: String },
    #[error("line {line}: number must be positive")]
    ZeroNumber { line: usize },
    #[error("line {line}: clause ({number}) has no text")]
    EmptyClause { line: usize, number: u32 },
    #[error("line {line}: Pasal {number} has neither preamble nor clauses")]
    EmptyArticle { line: usize, number: u32 },
    #[error("line {line}: BAB {numeral} has no articles")]
    EmptyChapter { line: usize, numeral: String },
    #[error("document contains no articles")]
    NoArticles,
}

fn chapter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^BAB\s+([IVXLC]+)$").unwrap())
}

fn article_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^Pasal\s+(\d+)$").unwrap())
}

fn clause_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\((\d+)\)(?:\s+(.*))?$").unwrap())
}

/// Parses canonical Roman numerals in 1..=399.
pub fn from_roman(s: &str) -> Option<u32> {
    let value = |c: char| match c {
        'I' => Some(1),
        'V' => Some(5),
        'X' => Some(10),
        'L' => Some(50),
        'C' => Some(100),
        _ => None,
    };
    let digits: Vec<i64> = s.chars().map(value).collect::<Option<_>>()?;
    let mut total = 0i64;
    for (i, &d) in digits.iter().enumerate() {
        match digits.get(i + 1) {
            Some(&next) if next > d => total -= d,
            _ => total += d,
        }
    }
    let total = u32::try_from(total).ok()?;
    (total > 0 && total < 400 && to_roman(total) == s).then_some(total)
}

pub fn to_roman(mut n: u32) -> String {
    const TABLE: [(u32, &str); 9] = [
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut out = String::new();
    for (v, sym) in TABLE {
        while n >= v {
            out.push_str(sym);
            n -= v;
        }
    }
    out
}

fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn append_text(buf: &mut String, text: &str) {
    if !buf.is_empty() {
        buf.push(' ');
    }
    buf.push_str(text);
}

struct OpenArticle {
    article: Article,
    line: usize,
    clause_line: usize,
    open_clause: Option<Clause>,
}

impl OpenArticle {
    fn close_clause(&mut self) -> Result<(), ParseError> {
        if let Some(clause) = self.open_clause.take() {
            if clause.text.is_empty() {
                return Err(ParseError::EmptyClause {
                    line: self.clause_line,
                    number: clause.number,
                });
            }
            self.article.clauses.push(clause);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Article, ParseError> {
        self.close_clause()?;
        if self.article.preamble.is_empty() && self.article.clauses.is_empty() {
            return Err(ParseError::EmptyArticle {
                line: self.line,
                number: self.article.number,
            });
        }
        Ok(self.article)
    }
}

struct OpenChapter {
    chapter: Chapter,
    line: usize,
    numeral: String,
}

impl OpenChapter {
    fn finish(self) -> Result<Chapter, ParseError> {
        if self.chapter.articles.is_empty() {
            return Err(ParseError::EmptyChapter {
                line: self.line,
                numeral: self.numeral,
            });
        }
        Ok(self.chapter)
    }
}

/// Parses one statute into its chapter/article/clause tree.
pub fn parse_document(raw_text: &str, doc_id: &str, doc_kind: DocKind) -> Result<Document, ParseError> {
    if raw_text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    if !is_valid_doc_id(doc_id) {
        return Err(ParseError::InvalidDocumentId(doc_id.to_string()));
    }

    let mut front_matter: Vec<String> = Vec::new();
    let mut chapters: Vec<Chapter> = Vec::new();
    let mut chapter: Option<OpenChapter> = None;
    let mut article: Option<OpenArticle> = None;
    let mut seen_articles: HashSet<u32> = HashSet::new();
    let mut last_article = 0u32;
    let mut last_chapter = 0u32;

    for (idx, raw_line) in raw_text.lines().enumerate() {
        let line_no = idx + 1;
        let line = normalize_line(raw_line);
        if line.is_empty() {
            continue;
        }

        if let Some(caps) = chapter_re().captures(&line) {
            let numeral = caps[1].to_string();
            let number = from_roman(&numeral).ok_or_else(|| ParseError::InvalidChapterNumeral {
                line: line_no,
                numeral: numeral.clone(),
            })?;
            if number <= last_chapter {
                return Err(ParseError::NonMonotonicNumbering {
                    line: line_no,
                    unit: "chapter",
                    number,
                    previous: last_chapter,
                });
            }
            if let Some(open) = article.take() {
                chapter.as_mut().expect("article inside chapter").chapter.articles.push(open.finish()?);
            }
            if let Some(open) = chapter.take() {
                chapters.push(open.finish()?);
            }
            last_chapter = number;
            chapter = Some(OpenChapter {
                chapter: Chapter {
                    number,
                    title: None,
                    articles: Vec::new(),
                    implicit: false,
                },
                line: line_no,
                numeral,
            });
            continue;
        }

        if let Some(caps) = article_re().captures(&line) {
            let number: u32 = caps[1].parse().map_err(|_| ParseError::ZeroNumber { line: line_no })?;
            if number == 0 {
                return Err(ParseError::ZeroNumber { line: line_no });
            }
            if seen_articles.contains(&number) {
                return Err(ParseError::DuplicateArticle {
                    line: line_no,
                    number,
                });
            }
            if number < last_article {
                return Err(ParseError::NonMonotonicNumbering {
                    line: line_no,
                    unit: "article",
                    number,
                    previous: last_article,
                });
            }
            if let Some(open) = article.take() {
                chapter.as_mut().expect("article inside chapter").chapter.articles.push(open.finish()?);
            }
            if chapter.is_none() {
                last_chapter = 1;
                chapter = Some(OpenChapter {
                    chapter: Chapter {
                        number: 1,
                        title: None,
                        articles: Vec::new(),
                        implicit: true,
                    },
                    line: line_no,
                    numeral: "I".into(),
                });
            }
            seen_articles.insert(number);
            last_article = number;
            article = Some(OpenArticle {
                article: Article {
                    number,
                    heading: None,
                    preamble: String::new(),
                    clauses: Vec::new(),
                },
                line: line_no,
                clause_line: line_no,
                open_clause: None,
            });
            continue;
        }

        if let Some(open) = article.as_mut() {
            if let Some(caps) = clause_re().captures(&line) {
                let number: u32 = caps[1].parse().map_err(|_| ParseError::ZeroNumber { line: line_no })?;
                if number == 0 {
                    return Err(ParseError::ZeroNumber { line: line_no });
                }
                let previous = open
                    .open_clause
                    .as_ref()
                    .map(|c| c.number)
                    .or_else(|| open.article.clauses.last().map(|c| c.number))
                    .unwrap_or(0);
                if number <= previous {
                    return Err(ParseError::NonMonotonicNumbering {
                        line: line_no,
                        unit: "clause",
                        number,
                        previous,
                    });
                }
                open.close_clause()?;
                open.clause_line = line_no;
                open.open_clause = Some(Clause {
                    number,
                    text: caps.get(2).map(|m| m.as_str().to_string()).unwrap_or_default(),
                });
            } else if let Some(clause) = open.open_clause.as_mut() {
                append_text(&mut clause.text, &line);
            } else {
                append_text(&mut open.article.preamble, &line);
            }
            continue;
        }

        match chapter.as_mut() {
            Some(open) => append_text(open.chapter.title.get_or_insert_with(String::new), &line),
            None => front_matter.push(line),
        }
    }

    if let Some(open) = article.take() {
        chapter.as_mut().expect("article inside chapter").chapter.articles.push(open.finish()?);
    }
    if let Some(open) = chapter.take() {
        chapters.push(open.finish()?);
    }
    if chapters.is_empty() {
        return Err(ParseError::NoArticles);
    }

    let title = front_matter
        .first()
        .cloned()
        .unwrap_or_else(|| doc_id.to_string());
    Ok(Document {
        id: doc_id.to_string(),
        title,
        doc_kind,
        chapters,
        front_matter: front_matter.join("\n"),
    })
}

/// Splits a document into segments at one hierarchy level, in document order.
pub fn segment(doc: &Document, level: Level) -> Vec<Segment> {
    match level {
        Level::Chapter => doc
            .chapters
            .iter()
            .map(|ch| Segment {
                level,
                source: SourceRef::chapter(&doc.id, ch.number),
                text: ch.text(),
            })
            .collect(),
        Level::Article => doc
            .articles()
            .map(|(_, a)| Segment {
                level,
                source: SourceRef::article(&doc.id, a.number),
                text: a.text(),
            })
            .collect(),
        Level::Clause => doc
            .articles()
            .flat_map(|(_, a)| {
                a.clauses.iter().map(move |c| Segment {
                    level,
                    source: SourceRef::clause(&doc.id, a.number, c.number),
                    text: c.text.clone(),
                })
            })
            .collect(),
    }
}

/// Finest addressable units: every clause, plus clause-less articles whole.
pub fn leaf_segments(doc: &Document) -> Vec<Segment> {
    let mut out = Vec::new();
    for (_, a) in doc.articles() {
        if a.clauses.is_empty() {
            out.push(Segment {
                level: Level::Article,
                source: SourceRef::article(&doc.id, a.number),
                text: a.text(),
            });
        } else {
            out.extend(a.clauses.iter().map(|c| Segment {
                level: Level::Clause,
                source: SourceRef::clause(&doc.id, a.number, c.number),
                text: c.text.clone(),
            }));
        }
    }
    out
}

fn render_article(article: &Article, out: &mut Vec<String>) {
    out.push(format!("Pasal {}", article.number));
    if !article.preamble.is_empty() {
        out.push(article.preamble.clone());
    }
    for c in &article.clauses {
        out.push(format!("({}) {}", c.number, c.text));
    }
}

fn render_chapter(chapter: &Chapter, out: &mut Vec<String>) {
    if !chapter.implicit {
        out.push(format!("BAB {}", to_roman(chapter.number)));
        if let Some(title) = &chapter.title {
            out.push(title.clone());
        }
    }
    for a in &chapter.articles {
        render_article(a, out);
    }
}

/// Re-emits a whole document in the marker grammar.
pub fn render_document(doc: &Document) -> String {
    let mut lines = Vec::new();
    if !doc.front_matter.is_empty() {
        lines.push(doc.front_matter.clone());
    }
    for ch in &doc.chapters {
        render_chapter(ch, &mut lines);
    }
    lines.join("\n")
}

/// Re-emits a segment with its marker lines, using the corpus for structure.
pub fn render_segment(corpus: &Corpus, seg: &Segment) -> Result<String, CorpusError> {
    let doc = corpus
        .document(&seg.source.regulation_id)
        .ok_or_else(|| CorpusError::NotFound(seg.source.clone()))?;
    let not_found = || CorpusError::NotFound(seg.source.clone());
    let mut lines = Vec::new();
    match seg.level {
        Level::Clause => {
            let clause = seg.source.clause_number.ok_or_else(not_found)?;
            return Ok(format!("({}) {}", clause, seg.text));
        }
        Level::Article => {
            let number = seg.source.article_number.ok_or_else(not_found)?;
            let (_, article) = doc
                .articles()
                .find(|(_, a)| a.number == number)
                .ok_or_else(not_found)?;
            render_article(article, &mut lines);
        }
        Level::Chapter => {
            let number = seg.source.chapter_number.ok_or_else(not_found)?;
            let chapter = doc
                .chapters
                .iter()
                .find(|c| c.number == number)
                .ok_or_else(not_found)?;
            let explicit = Chapter {
                implicit: false,
                ..chapter.clone()
            };
            render_chapter(&explicit, &mut lines);
        }
    }
    Ok(lines.join("\n"))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("not found: {0}")]
    NotFound(SourceRef),
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
}

/// A set of parsed documents with constant-time reference lookup.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "CorpusFile", into = "CorpusFile")]
pub struct Corpus {
    documents: Vec<Document>,
    lookup: HashMap<SourceRef, Segment>,
    article_chapter: HashMap<(String, u32), u32>,
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    documents: Vec<Document>,
}

impl TryFrom<CorpusFile> for Corpus {
    type Error = CorpusError;

    fn try_from(file: CorpusFile) -> Result<Self, Self::Error> {
        Corpus::new(file.documents)
    }
}

impl From<Corpus> for CorpusFile {
    fn from(c: Corpus) -> Self {
        CorpusFile {
            documents: c.documents,
        }
    }
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut lookup = HashMap::new();
        let mut article_chapter = HashMap::new();
        let mut ids = HashSet::new();
        for doc in &documents {
            if !ids.insert(doc.id.clone()) {
                return Err(CorpusError::DuplicateDocument(doc.id.clone()));
            }
            for level in [Level::Chapter, Level::Article, Level::Clause] {
                for seg in segment(doc, level) {
                    lookup.insert(seg.source.clone(), seg);
                }
            }
            for (ch, a) in doc.articles() {
                article_chapter.insert((doc.id.clone(), a.number), ch.number);
            }
        }
        Ok(Self {
            documents,
            lookup,
            article_chapter,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Number of article and clause segments indexed.
    pub fn addressable_units(&self) -> usize {
        self.lookup
            .keys()
            .filter(|r| r.article_number.is_some())
            .count()
    }

    /// Segments at `level` across all documents, in corpus order.
    pub fn segments(&self, level: Level) -> Vec<Segment> {
        self.documents.iter().flat_map(|d| segment(d, level)).collect()
    }

    pub fn leaf_segments(&self) -> Vec<Segment> {
        self.documents.iter().flat_map(leaf_segments).collect()
    }

    pub fn resolve(&self, source: &SourceRef) -> Result<&Segment, CorpusError> {
        let not_found = || CorpusError::NotFound(source.clone());
        let key = match (source.chapter_number, source.article_number) {
            (Some(ch), Some(article)) => {
                let actual = self
                    .article_chapter
                    .get(&(source.regulation_id.clone(), article))
                    .ok_or_else(not_found)?;
                if *actual != ch {
                    return Err(not_found());
                }
                SourceRef {
                    chapter_number: None,
                    ..source.clone()
                }
            }
            _ => source.clone(),
        };
        self.lookup.get(&key).ok_or_else(not_found)
    }
}

/// `resolve_reference` as a free function over a corpus.
pub fn resolve_reference<'c>(corpus: &'c Corpus, source: &SourceRef) -> Result<&'c Segment, CorpusError> {
    corpus.resolve(source)
}
