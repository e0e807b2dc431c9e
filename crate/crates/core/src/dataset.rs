//! Instruction-pair dataset construction: prompt templates, lenient parsing
//! of model responses, the generation loop, dedup, stratified splitting and
//! JSONL / training-manifest export.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunker::{chunk_corpus, ChunkConfig, ChunkError};
use crate::client::{prompt_hash, ChatClient, ClientError};
use crate::corpus::{Corpus, Level, SourceRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    OverlappingAnalysis,
    ElementExtraction,
    LegalQa,
    Summarization,
    DraftingRevisions,
    DraftingProvisions,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::OverlappingAnalysis,
        TaskKind::ElementExtraction,
        TaskKind::LegalQa,
        TaskKind::Summarization,
        TaskKind::DraftingRevisions,
        TaskKind::DraftingProvisions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::OverlappingAnalysis => "overlapping_analysis",
            TaskKind::ElementExtraction => "element_extraction",
            TaskKind::LegalQa => "legal_qa",
            TaskKind::Summarization => "summarization",
            TaskKind::DraftingRevisions => "drafting_revisions",
            TaskKind::DraftingProvisions => "drafting_provisions",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TaskKind::OverlappingAnalysis => "Legal overlapping analysis",
            TaskKind::ElementExtraction => "Element extraction",
            TaskKind::LegalQa => "Legal Q&A",
            TaskKind::Summarization => "Legal summarization",
            TaskKind::DraftingRevisions => "Drafting revisions",
            TaskKind::DraftingProvisions => "Drafting provisions",
        }
    }

    fn index(self) -> u64 {
        TaskKind::ALL.iter().position(|&t| t == self).expect("listed") as u64
    }

    fn instructions(self) -> String {
        match self {
            TaskKind::OverlappingAnalysis => "Each input asks whether the provision conflicts with or duplicates \
                 other provisions on the same matter; each output names the overlap (or its absence) and explains it."
                .into(),
            TaskKind::ElementExtraction => {
                let names: Vec<&str> = LegalElement::ALL.iter().map(|e| e.label()).collect();
                format!(
                    "Each input asks for exactly one legal element of the provision, chosen from: {}. \
                     Each output starts with the element name followed by a colon and then states that \
                     element as found in the provision.",
                    names.join(", ")
                )
            }
            TaskKind::LegalQa => "Each input is a question a policymaker could ask that the provision answers; \
                 each output answers it using only the provision."
                .into(),
            TaskKind::Summarization => "Each input requests a brief of the provision for a stated audience; \
                 each output is a concise, faithful summary."
                .into(),
            TaskKind::DraftingRevisions => "Each input identifies a weakness in the provision and asks for a \
                 revision; each output proposes revised wording and justifies it."
                .into(),
            TaskKind::DraftingProvisions => "Each input describes a gap the provision leaves open; each output \
                 drafts a new article or clause in statutory style to fill it."
                .into(),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// Per-task record counts of the reference legal SFT dataset (8507 total).
pub fn reference_targets() -> BTreeMap<TaskKind, usize> {
    BTreeMap::from([
        (TaskKind::OverlappingAnalysis, 1087),
        (TaskKind::ElementExtraction, 890),
        (TaskKind::LegalQa, 1794),
        (TaskKind::Summarization, 1415),
        (TaskKind::DraftingRevisions, 1571),
        (TaskKind::DraftingProvisions, 1750),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegalElement {
    Subject,
    Object,
    Action,
    Intention,
    Sanction,
    TimeDuration,
    Location,
    Procedure,
}

impl LegalElement {
    pub const ALL: [LegalElement; 8] = [
        LegalElement::Subject,
        LegalElement::Object,
        LegalElement::Action,
        LegalElement::Intention,
        LegalElement::Sanction,
        LegalElement::TimeDuration,
        LegalElement::Location,
        LegalElement::Procedure,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LegalElement::Subject => "Subject",
            LegalElement::Object => "Object",
            LegalElement::Action => "Action",
            LegalElement::Intention => "Intention",
            LegalElement::Sanction => "Sanction",
            LegalElement::TimeDuration => "Time and Duration",
            LegalElement::Location => "Location or Place",
            LegalElement::Procedure => "Procedure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub input: String,
    pub output: String,
    pub task: TaskKind,
    #[serde(rename = "ref", default)]
    pub source: Option<SourceRef>,
    #[serde(default)]
    pub provenance: String,
}

impl InstructionPair {
    pub fn is_valid(&self) -> bool {
        let input = self.input.trim();
        let output = self.output.trim();
        !input.is_empty() && !output.is_empty() && input != output
    }
}

/// A response item that could not be turned into an [`InstructionPair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectNote {
    pub task: TaskKind,
    #[serde(rename = "ref")]
    pub source: SourceRef,
    pub reason: String,
    pub snippet: String,
}

impl RejectNote {
    fn new(task: TaskKind, source: &SourceRef, reason: impl Into<String>, snippet: &str) -> Self {
        Self {
            task,
            source: source.clone(),
            reason: reason.into(),
            snippet: snippet.chars().take(120).collect(),
        }
    }
}

/// Prompt for one generation call; `round` distinguishes repeat visits to the same context.
pub fn build_prompt_variant(task: TaskKind, context_text: &str, source: &SourceRef, n_items: usize, round: usize) -> String {
    let mut p = String::new();
    p.push_str("You are preparing supervised training data from Indonesian legal texts.\n");
    p.push_str(&format!("Task: {}\n", task.as_str()));
    p.push_str(&format!("Task name: {}\n", task.title()));
    p.push_str(&format!("Source: {} ({})\n", source.label(), source));
    p.push_str("<context>\n");
    p.push_str(context_text);
    p.push_str("\n</context>\n");
    p.push_str(&task.instructions());
    p.push('\n');
    p.push_str(&format!(
        "Produce {n_items} records grounded in the context above. Every record must cite the \
         government regulation (PP), the article (Pasal) and the clause (ayat) it relies on.\n"
    ));
    p.push_str("Return a JSON array in which every element has exactly this shape:\n");
    p.push_str("{\"input\": \"<instruction or question>\", \"output\": \"<answer>\"}\n");
    if round > 0 {
        p.push_str(&format!(
            "Batch {round}: every record must differ from the records of earlier batches for this context.\n"
        ));
    }
    p
}

pub fn build_prompt(task: TaskKind, context_text: &str, source: &SourceRef, n_items: usize) -> String {
    build_prompt_variant(task, context_text, source, n_items, 0)
}

/// Spans of top-level `{...}` objects, honoring single- and double-quoted strings.
fn object_spans(raw: &str) -> (Vec<&str>, bool) {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in raw.char_indices() {
        if depth == 0 {
            if c == '{' {
                depth = 1;
                start = i;
            }
            continue;
        }
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&raw[start..=i]);
                }
            }
            _ => {}
        }
    }
    (spans, depth > 0)
}

/// Rewrites single-quoted strings as JSON strings and drops trailing commas.
fn normalize_jsonish(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' | '\'' => {
                let q = c;
                out.push('"');
                i += 1;
                while i < chars.len() && chars[i] != q {
                    match chars[i] {
                        '\\' if i + 1 < chars.len() => {
                            if chars[i + 1] == '\'' {
                                out.push('\'');
                            } else {
                                out.push('\\');
                                out.push(chars[i + 1]);
                            }
                            i += 1;
                        }
                        '"' => out.push_str("\\\""),
                        '\n' => out.push_str("\\n"),
                        '\r' => {}
                        '\t' => out.push_str("\\t"),
                        other => out.push(other),
                    }
                    i += 1;
                }
                out.push('"');
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(',');
                }
            }
            other => out.push(other),
        }
        i += 1;
    }
    out
}

fn collect_items<'v>(v: &'v Value, out: &mut Vec<&'v serde_json::Map<String, Value>>) {
    match v {
        Value::Object(map) if map.contains_key("input") || map.contains_key("output") => out.push(map),
        Value::Object(map) => map.values().for_each(|c| collect_items(c, out)),
        Value::Array(items) => items.iter().for_each(|c| collect_items(c, out)),
        _ => {}
    }
}

fn text_field(map: &serde_json::Map<String, Value>, key: &str) -> Result<String, String> {
    match map.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(format!("empty \"{key}\"")),
        Some(_) => Err(format!("\"{key}\" is not a string")),
        None => Err(format!("missing \"{key}\"")),
    }
}

/// Extracts every well-formed `{input, output}` record from a raw model response.
/// Never fails: anything unusable becomes a [`RejectNote`].
pub fn parse_client_response(raw: &str, task: TaskKind, source: &SourceRef) -> (Vec<InstructionPair>, Vec<RejectNote>) {
    let mut pairs = Vec::new();
    let mut rejects = Vec::new();
    let (spans, unterminated) = object_spans(raw);
    if spans.is_empty() {
        rejects.push(RejectNote::new(task, source, "no JSON object found", raw));
        return (pairs, rejects);
    }
    for span in spans {
        let value: Value = match serde_json::from_str(span).or_else(|_| serde_json::from_str(&normalize_jsonish(span))) {
            Ok(v) => v,
            Err(e) => {
                rejects.push(RejectNote::new(task, source, format!("invalid JSON: {e}"), span));
                continue;
            }
        };
        let mut items = Vec::new();
        collect_items(&value, &mut items);
        if items.is_empty() {
            rejects.push(RejectNote::new(task, source, "object has no input/output", span));
        }
        for map in items {
            match (text_field(map, "input"), text_field(map, "output")) {
                (Ok(input), Ok(output)) if input == output => {
                    rejects.push(RejectNote::new(task, source, "input equals output", span));
                }
                (Ok(input), Ok(output)) => pairs.push(InstructionPair {
                    input,
                    output,
                    task,
                    source: Some(source.clone()),
                    provenance: String::new(),
                }),
                (Err(e), _) | (_, Err(e)) => rejects.push(RejectNote::new(task, source, e, span)),
            }
        }
    }
    if unterminated {
        rejects.push(RejectNote::new(task, source, "unterminated object", raw));
    }
    (pairs, rejects)
}

/// Drops invalid records and `(input, task)` duplicates, keeping first occurrences.
pub fn validate_and_dedup(pairs: Vec<InstructionPair>) -> Vec<InstructionPair> {
    let mut seen: HashSet<(String, TaskKind)> = HashSet::new();
    pairs
        .into_iter()
        .filter(|p| p.is_valid() && seen.insert((p.input.clone(), p.task)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJobConfig {
    pub targets: BTreeMap<TaskKind, usize>,
    pub items_per_call: usize,
    pub max_retries: usize,
    pub seed: u64,
    /// Maximum in-flight client calls.
    pub parallelism: usize,
    #[serde(with = "duration_ms")]
    pub retry_backoff: Duration,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for GenerationJobConfig {
    fn default() -> Self {
        Self {
            targets: reference_targets(),
            items_per_call: 3,
            max_retries: 2,
            seed: 0,
            parallelism: 4,
            retry_backoff: Duration::ZERO,
        }
    }
}

impl GenerationJobConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.targets.values().sum::<usize>() == 0 {
            return Err(GenerationError::InvalidConfig("all task targets are zero".into()));
        }
        if self.items_per_call == 0 {
            return Err(GenerationError::InvalidConfig("items_per_call must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutput {
    pub pairs: Vec<InstructionPair>,
    pub rejects: Vec<RejectNote>,
    pub calls: usize,
}

impl GenerationOutput {
    pub fn count(&self, task: TaskKind) -> usize {
        self.pairs.iter().filter(|p| p.task == task).count()
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error("client error: {0}")]
    Client(ClientError),
    #[error("targets not reached; shortfall {shortfall:?}")]
    TargetUnreachable {
        shortfall: BTreeMap<TaskKind, usize>,
        partial: GenerationOutput,
    },
}

struct Unit {
    text: String,
    source: SourceRef,
}

fn units_for(task: TaskKind, corpus: &Corpus, chunk_cfg: &ChunkConfig) -> Result<Vec<Unit>, ChunkError> {
    let from_segments = |segs: Vec<crate::corpus::Segment>| {
        segs.into_iter()
            .map(|s| Unit {
                text: s.text,
                source: s.source,
            })
            .collect::<Vec<_>>()
    };
    Ok(match task {
        TaskKind::ElementExtraction | TaskKind::LegalQa => from_segments(corpus.leaf_segments()),
        TaskKind::Summarization => {
            let mut segs = corpus.segments(Level::Article);
            segs.extend(corpus.segments(Level::Chapter));
            from_segments(segs)
        }
        _ => chunk_corpus(corpus, chunk_cfg)?
            .into_iter()
            .map(|c| Unit {
                text: c.text,
                source: c.source.expect("corpus chunks carry a document ref"),
            })
            .collect(),
    })
}

fn call_with_retries(client: &dyn ChatClient, prompt: &str, max_retries: usize, backoff: Duration) -> Result<String, ClientError> {
    let mut attempt = 0;
    loop {
        match client.complete(prompt) {
            Ok(text) => return Ok(text),
            Err(e) if !e.retryable || attempt >= max_retries => return Err(e),
            Err(e) => {
                log::debug!("retrying after {e}");
                attempt += 1;
                if !backoff.is_zero() {
                    std::thread::sleep(backoff * attempt as u32);
                }
            }
        }
    }
}

/// Cycles each task's units through the client until its target count is met.
///
/// Calls are issued in batches of up to `cfg.parallelism`; responses are
/// merged in call order, so the result does not depend on completion order.
/// A task stops early when a call exhausts its retries or when a full pass
/// over its units adds no new record.
pub fn generate_dataset(
    corpus: &Corpus,
    cfg: &GenerationJobConfig,
    chunk_cfg: &ChunkConfig,
    client: &dyn ChatClient,
) -> Result<GenerationOutput, GenerationError> {
    cfg.validate()?;
    chunk_cfg.validate()?;
    if corpus.is_empty() {
        return Err(GenerationError::EmptyCorpus);
    }
    let identity = client.identity();
    let mut output = GenerationOutput::default();
    let mut shortfall = BTreeMap::new();

    for task in TaskKind::ALL {
        let target = cfg.targets.get(&task).copied().unwrap_or(0);
        if target == 0 {
            continue;
        }
        let mut units = units_for(task, corpus, chunk_cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (task.index() + 1).wrapping_mul(0x9e37_79b9));
        units.shuffle(&mut rng);
        if units.is_empty() {
            shortfall.insert(task, target);
            continue;
        }

        let mut seen: HashSet<String> = HashSet::new();
        let mut collected: Vec<InstructionPair> = Vec::with_capacity(target);
        let mut call = 0usize;
        let mut unproductive = 0usize;
        'task: while collected.len() < target {
            let remaining_calls = (target - collected.len()).div_ceil(cfg.items_per_call);
            let batch = cfg.parallelism.max(1).min(remaining_calls);
            let prompts: Vec<(String, usize)> = (call..call + batch)
                .map(|c| {
                    let unit = c % units.len();
                    let u = &units[unit];
                    (build_prompt_variant(task, &u.text, &u.source, cfg.items_per_call, c / units.len()), unit)
                })
                .collect();
            call += batch;
            output.calls += batch;

            let results: Vec<Result<String, ClientError>> = if batch == 1 {
                vec![call_with_retries(client, &prompts[0].0, cfg.max_retries, cfg.retry_backoff)]
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = prompts
                        .iter()
                        .map(|(p, _)| s.spawn(move || call_with_retries(client, p, cfg.max_retries, cfg.retry_backoff)))
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("client call panicked")).collect()
                })
            };

            for ((prompt, unit), result) in prompts.iter().zip(results) {
                if collected.len() >= target {
                    break;
                }
                let raw = match result {
                    Ok(raw) => raw,
                    Err(e) if !e.retryable => return Err(GenerationError::Client(e)),
                    Err(e) => {
                        log::warn!("{task}: giving up after retries: {e}");
                        break 'task;
                    }
                };
                let provenance = format!("{identity}#{}", prompt_hash(prompt));
                let (pairs, rejects) = parse_client_response(&raw, task, &units[*unit].source);
                output.rejects.extend(rejects);
                let before = collected.len();
                for mut pair in pairs {
                    if collected.len() >= target {
                        break;
                    }
                    if pair.is_valid() && seen.insert(pair.input.clone()) {
                        pair.provenance = provenance.clone();
                        collected.push(pair);
                    }
                }
                if collected.len() == before {
                    unproductive += 1;
                    if unproductive >= units.len() {
                        log::warn!("{task}: a full pass over {} units added nothing", units.len());
                        break 'task;
                    }
                } else {
                    unproductive = 0;
                }
            }
        }
        if collected.len() < target {
            shortfall.insert(task, target - collected.len());
        }
        output.pairs.extend(collected);
    }

    output.pairs = validate_and_dedup(std::mem::take(&mut output.pairs));
    if shortfall.is_empty() {
        Ok(output)
    } else {
        Err(GenerationError::TargetUnreachable {
            shortfall,
            partial: output,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("test fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Records a task contributes to the test split: `floor(fraction * n)`.
pub fn stratum_test_size(fraction: f64, n: usize) -> usize {
    // the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Stratified, seeded train/test split. Each task contributes
/// `floor(fraction * n_task)` test records chosen by a seeded shuffle;
/// both halves keep the input order.
pub fn split_dataset(
    pairs: &[InstructionPair],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<InstructionPair>, Vec<InstructionPair>), SplitError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::InvalidFraction(test_fraction));
    }
    if pairs.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    let mut in_test = vec![false; pairs.len()];
    for task in TaskKind::ALL {
        let mut idx: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.task == task)
            .map(|(i, _)| i)
            .collect();
        let take = stratum_test_size(test_fraction, idx.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(task.index().wrapping_mul(0x2545_f491)));
        idx.shuffle(&mut rng);
        for &i in &idx[..take] {
            in_test[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (p, t) in pairs.iter().zip(in_test) {
        if t {
            test.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one JSON record per line. Returns the record count.
pub fn export_jsonl(pairs: &[InstructionPair], path: &Path) -> Result<usize, DatasetError> {
    let mut buf = Vec::new();
    for p in pairs {
        serde_json::to_writer(&mut buf, p).expect("pair serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io_err(path))?;
    Ok(pairs.len())
}

#[derive(Serialize)]
struct TestRecord<'a> {
    example_id: String,
    #[serde(flatten)]
    pair: &'a InstructionPair,
}

/// Test-set JSONL: dataset records plus a stable `example_id` (`t00001`, ...).
pub fn export_test_jsonl(pairs: &[InstructionPair], path: &Path) -> Result<usize, DatasetError> {
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for (i, pair) in pairs.iter().enumerate() {
        let rec = TestRecord {
            example_id: test_example_id(i),
            pair,
        };
        serde_json::to_writer(&mut f, &rec).expect("pair serializes");
        f.write_all(b"\n").map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))?;
    Ok(pairs.len())
}

pub fn test_example_id(index: usize) -> String {
    format!("t{:05}", index + 1)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<InstructionPair>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn file_sha256(path: &Path) -> Result<String, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Descriptive fine-tuning settings for a dataset; nothing is trained here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub base_model: String,
    pub method: String,
    pub epochs: u32,
    pub per_device_batch: u32,
    pub max_source_tokens: u32,
    pub max_target_tokens: u32,
    pub dataset_path: String,
    pub dataset_sha256: String,
    pub record_count: usize,
}

pub const DEFAULT_BASE_MODEL: &str = "LLaMA2-7B";

impl TrainingManifest {
    /// Defaults for `base_model`: 13B models get a per-device batch of 1, others 2.
    pub fn for_dataset(base_model: &str, dataset_path: &Path) -> Result<Self, DatasetError> {
        let record_count = read_jsonl(dataset_path)?.len();
        let per_device_batch = if base_model.to_ascii_lowercase().contains("13b") { 1 } else { 2 };
        Ok(Self {
            base_model: base_model.to_string(),
            method: "lora-peft".into(),
            epochs: 3,
            per_device_batch,
            max_source_tokens: 2048,
            max_target_tokens: 1024,
            dataset_path: dataset_path.display().to_string(),
            dataset_sha256: file_sha256(dataset_path)?,
            record_count,
        })
    }
}

pub fn export_training_manifest(base_model: &str, dataset_path: &Path, manifest_path: &Path) -> Result<TrainingManifest, DatasetError> {
    let manifest = TrainingManifest::for_dataset(base_model, dataset_path)?;
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(manifest_path, json).map_err(io_err(manifest_path))?;
    Ok(manifest)
}
