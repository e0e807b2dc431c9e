//! Sentence-level BLEU and METEOR, and run-level evaluation reports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{InstructionPair, TaskKind};

/// Above this many matched unigrams METEOR alignment falls back to a greedy search.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    AddEpsilon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub bleu_max_n: usize,
    pub bleu_smoothing: Smoothing,
    pub bleu_epsilon: f64,
    pub meteor_alpha: f64,
    pub meteor_beta: f64,
    pub meteor_gamma: f64,
    pub lowercase: bool,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            bleu_max_n: 4,
            bleu_smoothing: Smoothing::AddEpsilon,
            bleu_epsilon: 0.1,
            meteor_alpha: 0.9,
            meteor_beta: 3.0,
            meteor_gamma: 0.5,
            lowercase: true,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.bleu_max_n == 0 {
            return Err("bleu_max_n must be >= 1".into());
        }
        if self.bleu_epsilon.is_nan() || self.bleu_epsilon <= 0.0 {
            return Err("bleu_epsilon must be positive".into());
        }
        if !(self.meteor_alpha > 0.0 && self.meteor_alpha <= 1.0) {
            return Err("meteor_alpha must be in (0, 1]".into());
        }
        if self.meteor_beta.is_nan() || self.meteor_beta <= 0.0 {
            return Err("meteor_beta must be positive".into());
        }
        if !(self.meteor_gamma > 0.0 && self.meteor_gamma <= 1.0) {
            return Err("meteor_gamma must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Splits on whitespace; each punctuation character is its own token.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let text = if lowercase { text.to_lowercase() } else { text.to_string() };
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram total for each order `1..=max_n`.
pub fn bleu_stats<S: AsRef<str>>(hypothesis: &[S], reference: &[S], max_n: usize) -> Vec<(usize, usize)> {
    (1..=max_n)
        .map(|n| {
            let hyp = ngram_counts(hypothesis, n);
            let refs = ngram_counts(reference, n);
            let clipped = hyp
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
            (clipped, hypothesis.len().saturating_sub(n - 1))
        })
        .collect()
}

/// Combines per-order statistics into a BLEU score.
pub fn bleu_from_stats(stats: &[(usize, usize)], hyp_len: usize, ref_len: usize, params: &EvalParams) -> f64 {
    if hyp_len == 0 || stats.is_empty() {
        return 0.0;
    }
    let weight = 1.0 / stats.len() as f64;
    let mut log_sum = 0.0;
    for (i, &(clipped, total)) in stats.iter().enumerate() {
        let matches = if clipped > 0 {
            clipped as f64
        } else if i > 0 && params.bleu_smoothing == Smoothing::AddEpsilon {
            params.bleu_epsilon
        } else {
            return 0.0;
        };
        log_sum += weight * (matches / total as f64).ln();
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

pub fn bleu<S: AsRef<str>>(hypothesis: &[S], reference: &[S], params: &EvalParams) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let max_n = params.bleu_max_n.min(hypothesis.len());
    let stats = bleu_stats(hypothesis, reference, max_n);
    Ok(bleu_from_stats(&stats, hypothesis.len(), reference.len(), params))
}

/// A METEOR matching stage beyond exact match (stemming, synonyms).
///
/// Tokens left unmatched by earlier stages are aligned when their keys are equal.
pub trait MatchStage: Send + Sync {
    fn name(&self) -> &str;
    fn key(&self, token: &str) -> Option<String>;
}

/// Unigram alignment as `(hyp_index, ref_index)` pairs sorted by hypothesis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    /// Runs of pairs contiguous in both hypothesis and reference.
    pub fn chunks(&self) -> usize {
        count_chunks(&self.pairs)
    }
}

pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

fn intern<'a, S: AsRef<str>>(hypothesis: &'a [S], reference: &'a [S]) -> (Vec<usize>, Vec<usize>, usize) {
    let mut ids: HashMap<&'a str, usize> = HashMap::new();
    let mut id_of = |t: &'a S| {
        let next = ids.len();
        *ids.entry(t.as_ref()).or_insert(next)
    };
    let h: Vec<usize> = hypothesis.iter().map(&mut id_of).collect();
    let r: Vec<usize> = reference.iter().map(&mut id_of).collect();
    (h, r, ids.len())
}

fn greedy_align(hyp: &[usize], refr: &[usize], used: &mut [bool], fixed: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = fixed.to_vec();
    for i in 0..hyp.len() {
        if out[i].is_some() {
            continue;
        }
        let w = hyp[i];
        let follow = i
            .checked_sub(1)
            .and_then(|p| out[p])
            .map(|p| p + 1)
            .filter(|&j| j < refr.len() && refr[j] == w && !used[j]);
        let pick = follow.or_else(|| (0..refr.len()).find(|&j| refr[j] == w && !used[j]));
        if let Some(j) = pick {
            used[j] = true;
            out[i] = Some(j);
        }
    }
    out
}

fn chunks_of(assign: &[Option<usize>]) -> usize {
    let pairs: Vec<(usize, usize)> = assign
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    count_chunks(&pairs)
}

struct ChunkSearch<'a> {
    hyp: &'a [usize],
    refr: &'a [usize],
    candidates: Vec<Vec<usize>>,
    skip_budget: Vec<usize>,
    used: Vec<bool>,
    current: Vec<Option<usize>>,
    best_chunks: usize,
    best: Vec<Option<usize>>,
}

impl ChunkSearch<'_> {
    fn dfs(&mut self, i: usize, chunks: usize) {
        if chunks >= self.best_chunks {
            return;
        }
        if i == self.hyp.len() {
            self.best_chunks = chunks;
            self.best.clone_from(&self.current);
            return;
        }
        let w = self.hyp[i];
        let follow = i
            .checked_sub(1)
            .and_then(|p| self.current[p])
            .map(|p| p + 1)
            .filter(|&j| j < self.refr.len() && self.refr[j] == w && !self.used[j]);
        if let Some(j) = follow {
            self.take(i, j, chunks);
        }
        for c in 0..self.candidates[i].len() {
            let j = self.candidates[i][c];
            if Some(j) != follow && !self.used[j] {
                self.take(i, j, chunks + 1);
            }
        }
        if self.skip_budget[w] > 0 {
            self.skip_budget[w] -= 1;
            self.dfs(i + 1, chunks);
            self.skip_budget[w] += 1;
        }
    }

    fn take(&mut self, i: usize, j: usize, chunks: usize) {
        self.used[j] = true;
        self.current[i] = Some(j);
        self.dfs(i + 1, chunks);
        self.current[i] = None;
        self.used[j] = false;
    }
}

/// Exact-match alignment with the maximum number of matches, and among
/// those the fewest chunks (exhaustive up to [`EXHAUSTIVE_MATCH_LIMIT`]
/// matches, greedy contiguity-preferring beyond).
pub fn align_exact<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Alignment {
    let (hyp, refr, vocab) = intern(hypothesis, reference);
    let mut hyp_counts = vec![0usize; vocab];
    let mut ref_counts = vec![0usize; vocab];
    hyp.iter().for_each(|&w| hyp_counts[w] += 1);
    refr.iter().for_each(|&w| ref_counts[w] += 1);
    let m: usize = (0..vocab).map(|w| hyp_counts[w].min(ref_counts[w])).sum();
    if m == 0 {
        return Alignment { pairs: Vec::new() };
    }

    let mut used = vec![false; refr.len()];
    let greedy = greedy_align(&hyp, &refr, &mut used, &vec![None; hyp.len()]);
    let assign = if m > EXHAUSTIVE_MATCH_LIMIT {
        greedy
    } else {
        let candidates = hyp
            .iter()
            .map(|&w| (0..refr.len()).filter(|&j| refr[j] == w).collect())
            .collect();
        let skip_budget = (0..vocab).map(|w| hyp_counts[w] - hyp_counts[w].min(ref_counts[w])).collect();
        let mut search = ChunkSearch {
            hyp: &hyp,
            refr: &refr,
            candidates,
            skip_budget,
            used: vec![false; refr.len()],
            current: vec![None; hyp.len()],
            best_chunks: chunks_of(&greedy),
            best: greedy,
        };
        search.dfs(0, 0);
        search.best
    };
    Alignment {
        pairs: assign
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect(),
    }
}

fn align_with_stages<S: AsRef<str>>(hypothesis: &[S], reference: &[S], stages: &[&dyn MatchStage]) -> Alignment {
    let exact = align_exact(hypothesis, reference);
    if stages.is_empty() {
        return exact;
    }
    let mut assign: Vec<Option<usize>> = vec![None; hypothesis.len()];
    let mut used = vec![false; reference.len()];
    for &(i, j) in &exact.pairs {
        assign[i] = Some(j);
        used[j] = true;
    }
    for stage in stages {
        // Key ids are interned per stage; unkeyed tokens get unique ids and never match.
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut fresh = usize::MAX;
        let mut key_id = |t: &str| match stage.key(t) {
            Some(k) => {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            }
            None => {
                fresh -= 1;
                fresh
            }
        };
        let hyp: Vec<usize> = hypothesis.iter().map(|t| key_id(t.as_ref())).collect();
        let refr: Vec<usize> = reference.iter().map(|t| key_id(t.as_ref())).collect();
        assign = greedy_align(&hyp, &refr, &mut used, &assign);
    }
    Alignment {
        pairs: assign
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect(),
    }
}

/// METEOR from alignment statistics.
pub fn meteor_from_stats(matches: usize, chunks: usize, hyp_len: usize, ref_len: usize, params: &EvalParams) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let precision = m / hyp_len as f64;
    let recall = m / ref_len as f64;
    let alpha = params.meteor_alpha;
    let fmean = precision * recall / (alpha * precision + (1.0 - alpha) * recall);
    let penalty = params.meteor_gamma * (chunks as f64 / m).powf(params.meteor_beta);
    (fmean * (1.0 - penalty)).clamp(0.0, 1.0)
}

pub fn meteor<S: AsRef<str>>(hypothesis: &[S], reference: &[S], params: &EvalParams) -> Result<f64, MetricError> {
    meteor_with_stages(hypothesis, reference, params, &[])
}

pub fn meteor_with_stages<S: AsRef<str>>(
    hypothesis: &[S],
    reference: &[S],
    params: &EvalParams,
    stages: &[&dyn MatchStage],
) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let alignment = align_with_stages(hypothesis, reference, stages);
    Ok(meteor_from_stats(
        alignment.matches(),
        alignment.chunks(),
        hypothesis.len(),
        reference.len(),
        params,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub example_id: String,
    pub task: TaskKind,
    pub hypothesis: String,
    pub reference: String,
    pub bleu: f64,
    pub meteor: f64,
    #[serde(default)]
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeans {
    pub count: usize,
    pub bleu: f64,
    pub meteor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub params: EvalParams,
    /// How sentence scores are pooled; always `sentence_mean`.
    pub aggregation: String,
    pub examples: Vec<ScoredExample>,
    pub mean_bleu: f64,
    pub mean_meteor: f64,
    pub per_task_means: BTreeMap<TaskKind, TaskMeans>,
    pub missing_outputs: usize,
    pub unknown_outputs: usize,
    /// Free-text qualitative review notes.
    #[serde(default)]
    pub notes: String,
}

fn mean(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n, if n == 0 { 0.0 } else { sum / n as f64 })
}

impl EvalReport {
    pub fn from_examples(params: EvalParams, examples: Vec<ScoredExample>, unknown_outputs: usize) -> Self {
        let (_, mean_bleu) = mean(examples.iter().map(|e| e.bleu));
        let (_, mean_meteor) = mean(examples.iter().map(|e| e.meteor));
        let mut per_task_means = BTreeMap::new();
        let tasks: Vec<TaskKind> = examples
            .iter()
            .map(|e| e.task)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for task in tasks {
            let of_task = || examples.iter().filter(move |e| e.task == task);
            let (count, bleu) = mean(of_task().map(|e| e.bleu));
            let (_, meteor) = mean(of_task().map(|e| e.meteor));
            per_task_means.insert(task, TaskMeans { count, bleu, meteor });
        }
        let missing_outputs = examples.iter().filter(|e| e.missing).count();
        Self {
            params,
            aggregation: "sentence_mean".into(),
            examples,
            mean_bleu,
            mean_meteor,
            per_task_means,
            missing_outputs,
            unknown_outputs,
            notes: String::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid eval params: {0}")]
    Params(String),
}

#[derive(Debug, Deserialize)]
struct OutputRecord {
    example_id: String,
    hypothesis: String,
}

#[derive(Debug, Deserialize)]
struct TestRecord {
    #[serde(default)]
    example_id: Option<String>,
    #[serde(flatten)]
    pair: InstructionPair,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

/// Scores one hypothesis/reference pair under `params`.
pub fn score_pair(hypothesis: &str, reference: &str, params: &EvalParams) -> Result<(f64, f64), MetricError> {
    let hyp = tokenize(hypothesis, params.lowercase);
    let refr = tokenize(reference, params.lowercase);
    Ok((bleu(&hyp, &refr, params)?, meteor(&hyp, &refr, params)?))
}

/// Scores model outputs (`{example_id, hypothesis}` JSONL) against a test set.
///
/// Test records are dataset JSONL lines; a record's example id is its
/// `example_id` field if present, otherwise its 1-based line number.
/// Missing outputs score zero and are counted in the report.
pub fn evaluate_run(outputs_path: &Path, test_set_path: &Path, params: &EvalParams) -> Result<EvalReport, EvalError> {
    params.validate().map_err(EvalError::Params)?;
    let mut outputs: HashMap<String, String> = HashMap::new();
    for (line, text) in read_lines(outputs_path)? {
        let rec: OutputRecord = serde_json::from_str(&text).map_err(|e| EvalError::Schema {
            path: outputs_path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if outputs.insert(rec.example_id.clone(), rec.hypothesis).is_some() {
            return Err(EvalError::Schema {
                path: outputs_path.to_path_buf(),
                line,
                message: format!("duplicate example_id {:?}", rec.example_id),
            });
        }
    }

    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (line, text) in read_lines(test_set_path)? {
        let schema = |message: String| EvalError::Schema {
            path: test_set_path.to_path_buf(),
            line,
            message,
        };
        let rec: TestRecord = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
        let example_id = rec.example_id.unwrap_or_else(|| line.to_string());
        if !seen.insert(example_id.clone()) {
            return Err(schema(format!("duplicate example_id {example_id:?}")));
        }
        let hypothesis = outputs.get(&example_id).cloned();
        let missing = hypothesis.is_none();
        let hypothesis = hypothesis.unwrap_or_default();
        let (bleu, meteor) =
            score_pair(&hypothesis, &rec.pair.output, params).map_err(|e| schema(e.to_string()))?;
        examples.push(ScoredExample {
            example_id,
            task: rec.pair.task,
            hypothesis,
            reference: rec.pair.output,
            bleu,
            meteor,
            missing,
        });
    }
    let unknown = outputs.keys().filter(|k| !seen.contains(*k)).count();
    let mut report = EvalReport::from_examples(params.clone(), examples, unknown);
    if report.missing_outputs > 0 {
        report.notes = format!("{} test examples had no output and scored 0", report.missing_outputs);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rag,
    FineTune,
    FineTuneRag,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rag => "RAG",
            Method::FineTune => "Fine-tune",
            Method::FineTuneRag => "Fine-tune + RAG",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(' ', "").as_str() {
            "rag" => Ok(Method::Rag),
            "fine-tune" | "finetune" => Ok(Method::FineTune),
            "fine-tune+rag" | "fine-tune-rag" | "finetune+rag" => Ok(Method::FineTuneRag),
            _ => Err(format!("unknown method {s:?} (rag|fine-tune|fine-tune-rag)")),
        }
    }
}

/// One line of a model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub size: String,
    pub method: Method,
    pub bleu: f64,
    pub meteor: f64,
}

impl ResultRow {
    pub fn from_report(model: &str, size: &str, method: Method, report: &EvalReport) -> Self {
        Self {
            model: model.into(),
            size: size.into(),
            method,
            bleu: report.mean_bleu,
            meteor: report.mean_meteor,
        }
    }
}

/// Plain-text table with columns Model, Size, Method, BLEU, Meteor.
pub fn render_results_table(rows: &[ResultRow]) -> String {
    let header = ["Model", "Size", "Method", "BLEU", "Meteor"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.size.clone(),
                r.method.to_string(),
                format!("{:.2}", r.bleu),
                format!("{:.2}", r.meteor),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| {
        row.iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header.map(String::from));
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn no_smoothing(max_n: usize) -> EvalParams {
        EvalParams {
            bleu_max_n: max_n,
            bleu_smoothing: Smoothing::None,
            ..EvalParams::default()
        }
    }

    #[test]
    fn bleu_identity_is_one() {
        let p = EvalParams::default();
        let x = toks("pendidikan dasar wajib diikuti setiap warga");
        assert_eq!(bleu(&x, &x, &p).unwrap(), 1.0);
        let short = toks("a b");
        assert_eq!(bleu(&short, &short, &p).unwrap(), 1.0);
    }

    #[test]
    fn bleu_two_gram_fixture() {
        let s = bleu(&toks("a b c d"), &toks("a b x d"), &no_smoothing(2)).unwrap();
        assert!((s - 0.5).abs() < 1e-9, "{s}");
    }

    #[test]
    fn bleu_zero_cases() {
        let p = EvalParams::default();
        assert_eq!(bleu(&toks("x y z"), &toks("a b c"), &p).unwrap(), 0.0);
        assert_eq!(bleu(&[] as &[&str], &toks("a"), &p).unwrap(), 0.0);
        assert_eq!(bleu(&toks("a"), &[] as &[&str], &p), Err(MetricError::EmptyReference));
        // no bigram match without smoothing collapses to zero
        assert_eq!(bleu(&toks("a x b"), &toks("a y b"), &no_smoothing(2)).unwrap(), 0.0);
        assert!(bleu(&toks("a x b"), &toks("a y b"), &EvalParams::default()).unwrap() > 0.0);
    }

    #[test]
    fn brevity_penalty_applies() {
        let p = EvalParams::default();
        let s = bleu(&toks("a b c d"), &toks("a b c d e f"), &p).unwrap();
        assert!((s - (1.0f64 - 6.0 / 4.0).exp()).abs() < 1e-12);
        assert!(s < 1.0);
    }

    #[test]
    fn meteor_fixtures() {
        let p = EvalParams::default();
        let s = meteor(&toks("the cat"), &toks("the cat"), &p).unwrap();
        assert!((s - 0.9375).abs() < 1e-9, "{s}");
        let one = meteor(&toks("kucing"), &toks("kucing"), &p).unwrap();
        assert!((one - 0.5).abs() < 1e-9);
        assert_eq!(meteor(&toks("a b"), &toks("c d"), &p).unwrap(), 0.0);
        assert_eq!(meteor(&toks("a"), &[] as &[&str], &p), Err(MetricError::EmptyReference));
    }

    #[test]
    fn alignment_prefers_fewer_chunks() {
        // greedy would align the first "a" to ref 0 and split into 2 chunks
        let al = align_exact(&toks("a b"), &toks("a x a b"));
        assert_eq!(al.matches(), 2);
        assert_eq!(al.chunks(), 1);
        assert_eq!(al.pairs, vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn greedy_beyond_limit_keeps_max_matches() {
        let hyp: Vec<String> = (0..20).map(|i| format!("t{}", i % 5)).collect();
        let refr: Vec<String> = (0..20).rev().map(|i| format!("t{}", i % 5)).collect();
        let al = align_exact(&hyp, &refr);
        assert_eq!(al.matches(), 20);
        let mut seen = HashSet::new();
        assert!(al.pairs.iter().all(|&(_, j)| seen.insert(j)));
    }

    struct PrefixStem;
    impl MatchStage for PrefixStem {
        fn name(&self) -> &str {
            "prefix4"
        }
        fn key(&self, token: &str) -> Option<String> {
            (token.chars().count() >= 4).then(|| token.chars().take(4).collect())
        }
    }

    #[test]
    fn extra_stage_adds_matches() {
        let p = EvalParams::default();
        let hyp = toks("pendidikan dasar");
        let refr = toks("pendidik dasar");
        let exact = meteor(&hyp, &refr, &p).unwrap();
        let stemmed = meteor_with_stages(&hyp, &refr, &p, &[&PrefixStem]).unwrap();
        assert!(stemmed > exact);
        assert!((stemmed - meteor(&refr, &refr, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Pasal 5(2), Ayat.", true), vec!["pasal", "5", "(", "2", ")", ",", "ayat", "."]);
        assert_eq!(tokenize("ABC def", false), vec!["ABC", "def"]);
        assert!(tokenize("   ", true).is_empty());
    }

    #[test]
    fn report_means() {
        let ex = |id: &str, task, bleu, meteor| ScoredExample {
            example_id: id.into(),
            task,
            hypothesis: String::new(),
            reference: "r".into(),
            bleu,
            meteor,
            missing: false,
        };
        let r = EvalReport::from_examples(
            EvalParams::default(),
            vec![ex("1", TaskKind::LegalQa, 0.2, 0.1), ex("2", TaskKind::Summarization, 0.4, 0.3)],
            0,
        );
        assert!((r.mean_bleu - 0.3).abs() < 1e-12);
        assert!((r.mean_meteor - 0.2).abs() < 1e-12);
        assert_eq!(r.per_task_means[&TaskKind::LegalQa].count, 1);
        assert!((r.per_task_means[&TaskKind::Summarization].bleu - 0.4).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let rows = vec![
            ResultRow { model: "m".into(), size: "7B".into(), method: Method::Rag, bleu: 0.01, meteor: 0.09 },
            ResultRow { model: "m".into(), size: "7B".into(), method: Method::FineTuneRag, bleu: 0.13, meteor: 0.34 },
        ];
        let t = render_results_table(&rows);
        let first = t.lines().next().unwrap();
        assert!(first.starts_with("Model"));
        for col in ["Size", "Method", "BLEU", "Meteor"] {
            assert!(first.contains(col));
        }
        assert!(t.contains("Fine-tune + RAG"));
        assert!(t.contains("0.13"));
        assert_eq!("fine-tune-rag".parse::<Method>().unwrap(), Method::FineTuneRag);
        assert_eq!("Fine-tune + RAG".parse::<Method>().unwrap(), Method::FineTuneRag);
    }

    #[test]
    fn params_validation() {
        assert!(EvalParams::default().validate().is_ok());
        let bad = EvalParams { bleu_max_n: 0, ..EvalParams::default() };
        assert!(bad.validate().is_err());
        let bad = EvalParams { meteor_gamma: 1.5, ..EvalParams::default() };
        assert!(bad.validate().is_err());
    }
}
