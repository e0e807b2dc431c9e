//! The `lexrag` command line: parse, chunk, gen-dataset, split, index, query,
//! eval and serve.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lexrag_core::chunker::{chunk_corpus, chunk_segments, chunks_to_jsonl, Chunk, ChunkConfig};
use lexrag_core::client::{
    ChatClient, EchoChatClient, EmbeddingClient, FixtureMode, HashEmbedder, HttpChatClient, HttpEmbeddingClient,
    MockChatClient,
};
use lexrag_core::dataset::{
    export_jsonl, export_test_jsonl, export_training_manifest, generate_dataset, read_jsonl, split_dataset,
    test_example_id, GenerationError, GenerationJobConfig, GenerationOutput, TaskKind,
};
use lexrag_core::kb::{index, KnowledgeBase};
use lexrag_core::loader::load_corpus;
use lexrag_core::metrics::{evaluate_run, render_results_table, EvalReport, Method, ResultRow};
use lexrag_core::rag::{answer_query, Answer, PromptLibrary, QueryRequest, RagConfig, DEFAULT_SYSTEM_PROMPT_ID};
use lexrag_core::Corpus;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{parse_targets, CliConfig};

#[derive(Debug, Parser)]
#[command(name = "lexrag", version, about = "Legal-corpus retrieval-augmented generation toolkit")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use offline deterministic clients instead of HTTP endpoints.
    #[arg(long, global = true)]
    pub mock_clients: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    /// Clauses, plus clause-less articles whole.
    Segment,
    /// Fixed-size token windows over each document body.
    Window,
}

#[derive(Debug, Args)]
pub struct ChunkFlags {
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse statute text files into a corpus JSON file.
    Parse {
        /// A statute .txt file or a directory of them.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a corpus into chunks (JSONL).
    Chunk {
        /// Statute file/directory or corpus JSON.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Unit::Window)]
        unit: Unit,
        #[command(flatten)]
        chunk: ChunkFlags,
    },
    /// Generate an instruction dataset through the chat client.
    GenDataset {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mock fixture directory (responses keyed by prompt hash).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Write every mock response to the fixture directory.
        #[arg(long, conflicts_with = "replay")]
        record: bool,
        /// Serve responses only from fixtures; a missing fixture is an error.
        #[arg(long)]
        replay: bool,
        /// Per-task targets, e.g. `legal_qa=100,summarization=50`.
        #[arg(long)]
        targets: Option<String>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Also write a fine-tuning manifest for the dataset.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        base_model: Option<String>,
        #[command(flatten)]
        chunk: ChunkFlags,
    },
    /// Stratified train/test split of a dataset.
    Split {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Embed corpus chunks and write a knowledge-base file.
    Index {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Unit::Segment)]
        unit: Unit,
        #[command(flatten)]
        chunk: ChunkFlags,
    },
    /// Answer a question against a knowledge base.
    Query {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = DEFAULT_SYSTEM_PROMPT_ID)]
        system_prompt: String,
        /// Print the full answer as JSON.
        #[arg(long)]
        json: bool,
        /// Answer every input of a test-set JSONL and write `{example_id, hypothesis}` lines.
        #[arg(long, conflicts_with = "text")]
        batch: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required_unless_present = "batch")]
        text: Option<String>,
    },
    /// Score model outputs against a test set with BLEU and METEOR.
    Eval {
        #[arg(long, required_unless_present = "table")]
        outputs: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        model: String,
        #[arg(long, default_value = "-")]
        size: String,
        #[arg(long, default_value = "rag")]
        method: String,
        /// Render a results table from previously written eval reports.
        #[arg(long, num_args = 1.., conflicts_with = "outputs")]
        table: Vec<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_target(false).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", error_line(&e));
            1
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn error_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg.replace('\n', " ")
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.mock_clients |= cli.mock_clients;
    let ctx = Invocation { command: cli.command };
    ctx.dispatch(cfg)
}

struct Invocation {
    command: Command,
}

fn apply_chunk_flags(cfg: &mut CliConfig, flags: &ChunkFlags) {
    if let Some(size) = flags.chunk_size {
        cfg.chunk.size = size;
    }
    if let Some(overlap) = flags.overlap {
        cfg.chunk.overlap = overlap;
    }
}

fn required(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| anyhow!("missing {name}: pass the flag or set it in the config file"))
}

impl Invocation {
    fn dispatch(self, mut cfg: CliConfig) -> Result<()> {
        match self.command {
            Command::Parse { input, out } => {
                cfg.validate()?;
                let input = required(input, &cfg.paths.corpus, "--in")?;
                let corpus = load_corpus(&input)?;
                let mut text = serde_json::to_string_pretty(&corpus)?;
                text.push('\n');
                write_output(out.as_deref(), &text)?;
                if let Some(out) = &out {
                    write_meta(out, "parse", &cfg, json!({ "in": input }))?;
                }
                eprintln!(
                    "parsed {} documents ({} addressable units)",
                    corpus.documents().len(),
                    corpus.addressable_units()
                );
                Ok(())
            }
            Command::Chunk { input, out, unit, chunk } => {
                apply_chunk_flags(&mut cfg, &chunk);
                cfg.validate()?;
                let input = required(input, &cfg.paths.corpus, "--in")?;
                let corpus = read_corpus(&input)?;
                let chunks = make_chunks(&corpus, unit, &cfg.chunk)?;
                write_output(out.as_deref(), &chunks_to_jsonl(&chunks))?;
                if let Some(out) = &out {
                    write_meta(out, "chunk", &cfg, json!({ "in": input, "unit": unit, "chunks": chunks.len() }))?;
                }
                eprintln!("{} chunks", chunks.len());
                Ok(())
            }
            Command::GenDataset {
                corpus,
                out,
                fixtures,
                record,
                replay,
                targets,
                parallelism,
                manifest,
                base_model,
                chunk,
            } => {
                apply_chunk_flags(&mut cfg, &chunk);
                if let Some(t) = targets {
                    cfg.generation.targets = parse_targets(&t)?;
                }
                if let Some(p) = parallelism {
                    cfg.generation.parallelism = p;
                }
                if let Some(m) = base_model {
                    cfg.generation.base_model = m;
                }
                if fixtures.is_some() {
                    cfg.paths.fixtures = fixtures;
                }
                cfg.validate()?;
                let corpus_path = required(corpus, &cfg.paths.corpus, "--corpus")?;
                let out = required(out, &cfg.paths.dataset, "--out")?;
                let corpus = read_corpus(&corpus_path)?;
                let mode = match (record, replay) {
                    (true, _) => FixtureMode::Record,
                    (_, true) => FixtureMode::Replay,
                    _ => FixtureMode::Synthesize,
                };
                let client = chat_client(&cfg, mode)?;
                let job = GenerationJobConfig {
                    targets: cfg.generation.targets.clone(),
                    items_per_call: cfg.generation.items_per_call,
                    max_retries: cfg.generation.max_retries,
                    seed: cfg.seed,
                    parallelism: cfg.generation.parallelism,
                    retry_backoff: if cfg.mock_clients {
                        Duration::ZERO
                    } else {
                        Duration::from_millis(cfg.generation.retry_backoff_ms)
                    },
                };
                let (output, failure) = match generate_dataset(&corpus, &job, &cfg.chunk, client.as_ref()) {
                    Ok(o) => (o, None),
                    Err(GenerationError::TargetUnreachable { shortfall, partial }) => {
                        let list: Vec<String> = shortfall.iter().map(|(t, n)| format!("{t} short by {n}")).collect();
                        (partial, Some(anyhow!("targets not reached: {}", list.join(", "))))
                    }
                    Err(e) => return Err(e.into()),
                };
                write_dataset(&out, &output)?;
                write_meta(
                    &out,
                    "gen-dataset",
                    &cfg,
                    json!({
                        "corpus": corpus_path,
                        "client": client.identity(),
                        "records": output.pairs.len(),
                        "rejects": output.rejects.len(),
                        "calls": output.calls,
                        "per_task": TaskKind::ALL.iter().map(|&t| (t.as_str(), output.count(t))).collect::<std::collections::BTreeMap<_, _>>(),
                    }),
                )?;
                for t in TaskKind::ALL {
                    eprintln!("{:<22} {}", t.as_str(), output.count(t));
                }
                eprintln!("{} records, {} rejected items, {} calls", output.pairs.len(), output.rejects.len(), output.calls);
                if let Some(err) = failure {
                    return Err(err);
                }
                if let Some(manifest) = manifest {
                    export_training_manifest(&cfg.generation.base_model, &out, &manifest)?;
                }
                Ok(())
            }
            Command::Split {
                input,
                train,
                test,
                test_fraction,
            } => {
                if let Some(f) = test_fraction {
                    cfg.generation.test_fraction = f;
                }
                cfg.validate()?;
                let input = required(input, &cfg.paths.dataset, "--in")?;
                let train_path = required(train, &cfg.paths.train, "--train")?;
                let test_path = required(test, &cfg.paths.test, "--test")?;
                let pairs = read_jsonl(&input)?;
                let (train, test) = split_dataset(&pairs, cfg.generation.test_fraction, cfg.seed)?;
                export_jsonl(&train, &train_path)?;
                export_test_jsonl(&test, &test_path)?;
                let info = json!({ "in": input, "train": train.len(), "test": test.len() });
                write_meta(&train_path, "split", &cfg, info.clone())?;
                write_meta(&test_path, "split", &cfg, info)?;
                eprintln!("train {} / test {}", train.len(), test.len());
                Ok(())
            }
            Command::Index { corpus, out, unit, chunk } => {
                apply_chunk_flags(&mut cfg, &chunk);
                cfg.validate()?;
                let corpus_path = required(corpus, &cfg.paths.corpus, "--corpus")?;
                let out = required(out, &cfg.paths.kb, "--out")?;
                let corpus = read_corpus(&corpus_path)?;
                let chunks = make_chunks(&corpus, unit, &cfg.chunk)?;
                let embed = embed_client(&cfg);
                let outcome = index(&chunks, embed.as_ref())?;
                for w in &outcome.warnings {
                    eprintln!("warning: skipped {}: {}", w.chunk_id, w.reason);
                }
                let bytes = outcome.kb.save(&out)?;
                write_meta(
                    &out,
                    "index",
                    &cfg,
                    json!({ "corpus": corpus_path, "unit": unit, "entries": outcome.kb.len(), "dim": outcome.kb.dim(), "embedder_id": outcome.kb.embedder_id(), "bytes": bytes }),
                )?;
                eprintln!("indexed {} entries (dim {}) into {}", outcome.kb.len(), outcome.kb.dim(), out.display());
                Ok(())
            }
            Command::Query {
                kb,
                k,
                system_prompt,
                json: as_json,
                batch,
                out,
                text,
            } => {
                if let Some(k) = k {
                    cfg.k = k;
                }
                cfg.validate()?;
                let kb = if cfg.k > 0 {
                    let path = required(kb, &cfg.paths.kb, "--kb")?;
                    Some(KnowledgeBase::load(&path).with_context(|| format!("loading {}", path.display()))?)
                } else {
                    None
                };
                let embed = embed_client(&cfg);
                if let Some(kb) = &kb {
                    if kb.embedder_id() != embed.identity() {
                        bail!(
                            "knowledge base was built with {} but the query embedder is {}",
                            kb.embedder_id(),
                            embed.identity()
                        );
                    }
                }
                let gen = generation_client(&cfg);
                let rag = rag_config(&cfg)?;
                let ask = |text: String| -> Result<Answer> {
                    let req = QueryRequest {
                        text,
                        k: cfg.k,
                        system_prompt_id: system_prompt.clone(),
                        model_id: String::new(),
                    };
                    Ok(answer_query(&req, kb.as_ref(), embed.as_ref(), gen.as_ref(), &rag)?)
                };
                if let Some(batch) = batch {
                    let pairs = read_jsonl(&batch)?;
                    let mut lines = String::new();
                    for (i, pair) in pairs.into_iter().enumerate() {
                        let answer = ask(pair.input)?;
                        lines.push_str(&serde_json::to_string(&json!({ "example_id": test_example_id(i), "hypothesis": answer.text }))?);
                        lines.push('\n');
                    }
                    write_output(out.as_deref(), &lines)?;
                    if let Some(out) = &out {
                        write_meta(out, "query", &cfg, json!({ "batch": batch, "system_prompt": system_prompt }))?;
                    }
                    return Ok(());
                }
                let answer = ask(text.expect("clap requires text without --batch"))?;
                let rendered = if as_json {
                    let mut s = serde_json::to_string_pretty(&answer)?;
                    s.push('\n');
                    s
                } else {
                    render_answer(&answer)
                };
                write_output(out.as_deref(), &rendered)
            }
            Command::Eval {
                outputs,
                test,
                out,
                model,
                size,
                method,
                table,
            } => {
                cfg.validate()?;
                if !table.is_empty() {
                    let rows = table
                        .iter()
                        .map(|p| -> Result<ResultRow> {
                            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                            let artifact: EvalArtifact =
                                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                            Ok(artifact.row)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    return write_output(out.as_deref(), &render_results_table(&rows));
                }
                let method: Method = method.parse().map_err(anyhow::Error::msg)?;
                let outputs = outputs.expect("clap requires --outputs without --table");
                let test = required(test, &cfg.paths.test, "--test")?;
                let report = evaluate_run(&outputs, &test, &cfg.eval)?;
                let row = ResultRow::from_report(&model, &size, method, &report);
                let artifact = EvalArtifact { row: row.clone(), report };
                if let Some(out) = &out {
                    let mut text = serde_json::to_string_pretty(&artifact)?;
                    text.push('\n');
                    write_output(Some(out), &text)?;
                    write_meta(out, "eval", &cfg, json!({ "outputs": outputs, "test": test }))?;
                }
                if artifact.report.missing_outputs > 0 {
                    eprintln!("warning: {}", artifact.report.notes);
                }
                print!("{}", render_results_table(&[row]));
                Ok(())
            }
            Command::Serve { kb, corpus, bind, port } => {
                if let Some(b) = bind {
                    cfg.service.bind = b;
                }
                if let Some(p) = port {
                    cfg.service.port = p;
                }
                cfg.validate()?;
                let kb = match kb.or_else(|| cfg.paths.kb.clone()) {
                    Some(p) if p.exists() => Some(KnowledgeBase::load(&p).with_context(|| format!("loading {}", p.display()))?),
                    _ => None,
                };
                let corpus = match corpus.or_else(|| cfg.paths.corpus.clone()) {
                    Some(p) => Some(read_corpus(&p)?),
                    None => None,
                };
                let rag = rag_config(&cfg)?;
                let state = lexrag_service::AppState::new(
                    cfg.service.clone(),
                    Arc::from(embed_client(&cfg)),
                    Arc::from(generation_client(&cfg)),
                    rag,
                );
                if kb.is_some() || corpus.is_some() {
                    state.install(kb, corpus);
                }
                let runtime = tokio::runtime::Runtime::new()?;
                runtime.block_on(lexrag_service::serve(Arc::new(state)))?;
                Ok(())
            }
        }
    }
}

/// Eval output file: the table row plus the full report.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub row: ResultRow,
    pub report: EvalReport,
}

fn render_answer(answer: &Answer) -> String {
    let mut out = String::new();
    out.push_str(answer.text.trim_end());
    out.push_str("\n\nCitations:\n");
    if answer.citations.is_empty() {
        out.push_str("  (none)\n");
    }
    for (i, c) in answer.citations.iter().enumerate() {
        out.push_str(&format!("  [{}] {} ({})\n", i + 1, c.label(), c));
    }
    out.push_str("Hits:\n");
    for h in &answer.hits {
        let r = h.chunk.source.as_ref().map_or_else(|| h.chunk.id.clone(), ToString::to_string);
        out.push_str(&format!("  {}. {:.6} {}\n", h.rank, h.score, r));
    }
    out
}

/// Statute text (file or directory) or a corpus JSON written by `parse`.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing corpus {}", path.display()));
    }
    Ok(load_corpus(path)?)
}

pub fn make_chunks(corpus: &Corpus, unit: Unit, cfg: &ChunkConfig) -> Result<Vec<Chunk>> {
    Ok(match unit {
        Unit::Segment => chunk_segments(&corpus.leaf_segments(), cfg.size)?,
        Unit::Window => chunk_corpus(corpus, cfg)?,
    })
}

fn chat_client(cfg: &CliConfig, mode: FixtureMode) -> Result<Box<dyn ChatClient>> {
    if !cfg.mock_clients {
        if mode != FixtureMode::Synthesize {
            bail!("--record/--replay need --mock-clients");
        }
        return Ok(Box::new(HttpChatClient::new(cfg.chat.http(), cfg.chat.temperature)));
    }
    Ok(match (&cfg.paths.fixtures, mode) {
        (Some(dir), mode) => Box::new(MockChatClient::with_fixtures(dir, mode, cfg.seed)),
        (None, FixtureMode::Synthesize) => Box::new(MockChatClient::synthetic(cfg.seed)),
        (None, _) => bail!("--record/--replay need --fixtures <dir>"),
    })
}

fn generation_client(cfg: &CliConfig) -> Box<dyn ChatClient> {
    if cfg.mock_clients {
        Box::new(EchoChatClient)
    } else {
        Box::new(HttpChatClient::new(cfg.chat.http(), cfg.chat.temperature))
    }
}

fn embed_client(cfg: &CliConfig) -> Box<dyn EmbeddingClient> {
    if cfg.mock_clients {
        Box::new(HashEmbedder::new(cfg.embedding.mock_dim, cfg.seed))
    } else {
        let e = &cfg.embedding;
        Box::new(HttpEmbeddingClient::new(e.http(), e.dim, e.batch_size))
    }
}

fn rag_config(cfg: &CliConfig) -> Result<RagConfig> {
    let prompts = match &cfg.paths.prompts {
        Some(p) => PromptLibrary::with_overrides(p)?,
        None => PromptLibrary::default(),
    };
    Ok(RagConfig {
        budget_tokens: cfg.budget_tokens,
        prompts,
    })
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_dataset(out: &Path, output: &GenerationOutput) -> Result<()> {
    export_jsonl(&output.pairs, out)?;
    let mut rejects = String::new();
    for r in &output.rejects {
        rejects.push_str(&serde_json::to_string(r)?);
        rejects.push('\n');
    }
    let path = sidecar(out, ".rejects.jsonl");
    fs::write(&path, rejects).with_context(|| format!("writing {}", path.display()))
}

/// `<out>.meta.json`: the effective config and command details.
fn write_meta(out: &Path, command: &str, cfg: &CliConfig, details: serde_json::Value) -> Result<()> {
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let meta = json!({
        "tool": "lexrag",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "created_at_ms": created_at,
        "details": details,
        "config": cfg,
    });
    let path = sidecar(out, ".meta.json");
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
