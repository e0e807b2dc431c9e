//! Acceptance suite. Runs every criterion in order and prints one
//! `PASS`/`FAIL` line each; exits non-zero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lexrag_core::chunker::{chunk_segments, chunk_text, Chunk, ChunkConfig};
use lexrag_core::client::{ClientError, EchoChatClient, EmbeddingClient, HashEmbedder};
use lexrag_core::corpus::{parse_document, render_document, DocKind, Level, SourceRef};
use lexrag_core::dataset::{read_jsonl, reference_targets, stratum_test_size, InstructionPair, TaskKind};
use lexrag_core::kb::{index, EmbeddingVector, KbEntry, KbError, KnowledgeBase};
use lexrag_core::loader::{desk_corpus, desk_documents, RawDocument};
use lexrag_core::metrics::{bleu, meteor, render_results_table, EvalParams, Method, ResultRow, Smoothing};
use lexrag_core::rag::{answer_query, QueryRequest, RagConfig, DEFAULT_SYSTEM_PROMPT_ID};
use lexrag_service::{router, AppState, ServiceConfig};
use proptest::test_runner::{Config as ProptestConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use support::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure!(took < limit, "{what} took {took:.2?}, limit {limit:?}");
    Ok(took)
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("metric oracle equivalence", metric_oracle),
        ("retrieval oracle", retrieval_oracle),
        ("parser round trip", parser_round_trip),
        ("chunker reconstruction", chunker_reconstruction),
        ("dataset pipeline offline", dataset_pipeline),
        ("end-to-end RAG determinism", rag_determinism),
        ("KB persistence", kb_persistence),
        ("service concurrency", service_concurrency),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    let _ = panic::take_hook();
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn metric_oracle() -> Outcome {
    let started = Instant::now();
    let seqs = all_sequences(&["a", "b", "c"], 5);
    let plain = EvalParams {
        bleu_smoothing: Smoothing::None,
        ..EvalParams::default()
    };
    let smoothed = EvalParams::default();
    let mut cases = 0usize;
    for h in &seqs {
        for r in &seqs {
            for params in [&plain, &smoothed] {
                let got = bleu(h, r, params).unwrap();
                let want = bleu_oracle(h, r, params.bleu_max_n, params.bleu_smoothing == Smoothing::AddEpsilon, params.bleu_epsilon);
                ensure!(got == want, "bleu {h:?} vs {r:?}: {got} != {want}");
            }
            let got = meteor(h, r, &smoothed).unwrap();
            let want = meteor_oracle(h, r, 0.9, 3.0, 0.5);
            ensure!(got == want, "meteor {h:?} vs {r:?}: {got} != {want}");
            cases += 1;
        }
    }

    let bleu2 = EvalParams {
        bleu_max_n: 2,
        bleu_smoothing: Smoothing::None,
        ..EvalParams::default()
    };
    let fixtures = [
        ("bleu-2", bleu(&["a", "b", "c", "d"], &["a", "b", "x", "d"], &bleu2).unwrap(), 0.5),
        ("meteor two tokens", meteor(&["the", "cat"], &["the", "cat"], &smoothed).unwrap(), 0.9375),
        ("meteor one token", meteor(&["cat"], &["cat"], &smoothed).unwrap(), 0.5),
    ];
    for (what, got, want) in fixtures {
        ensure!((got - want).abs() <= 1e-9 && got.is_finite(), "{what}: {got} vs {want}");
    }
    let took = within(started, Duration::from_secs(60), "metric sweep")?;
    Ok(format!("{cases} pairs exact, 3 fixtures within 1e-9, {took:.1?}"))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (KnowledgeBase, Vec<Vec<f32>>, usize) {
    let n = rng.gen_range(1..=1000);
    let dim = rng.gen_range(1..=128);
    let integer = rng.gen_bool(0.5);
    let mut vectors: Vec<Vec<f32>> = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i > 0 && rng.gen_bool(0.1) {
            vectors[rng.gen_range(0..i)].clone()
        } else {
            let mut v: Vec<f32> = (0..dim)
                .map(|_| if integer { rng.gen_range(-2i32..=2) as f32 } else { rng.gen_range(-1.0f32..1.0) })
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                v[0] = 1.0;
            }
            v
        };
        vectors.push(v);
    }
    let entries = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| KbEntry {
            id: format!("e{i}"),
            chunk: Chunk {
                id: format!("e{i}"),
                seq: i,
                source: None,
                token_count: 1,
                text: format!("t{i}"),
            },
            vector: EmbeddingVector::new(v.clone()),
        })
        .collect();
    (KnowledgeBase::new(dim, entries, "oracle".into(), 0).unwrap(), vectors, dim)
}

fn retrieval_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0usize;
    for instance in 0..200 {
        let (kb, vectors, dim) = random_instance(&mut rng);
        let mut q: Vec<f32> = if rng.gen_bool(0.3) {
            vectors[rng.gen_range(0..vectors.len())].clone()
        } else {
            (0..dim).map(|_| rng.gen_range(-2i32..=2) as f32).collect()
        };
        if q.iter().all(|&x| x == 0.0) {
            q[0] = -1.0;
        }
        let query = EmbeddingVector::new(q.clone());
        for k in [1, 4, 10] {
            let hits = kb.search_topk(&query, k).unwrap();
            let got: Vec<usize> = hits.iter().map(|h| h.chunk.seq).collect();
            let want = topk_oracle(&vectors, &q, k);
            ensure!(got == want, "instance {instance} k={k}: {got:?} != {want:?}");
            ensure!(hits.iter().enumerate().all(|(i, h)| h.rank == i + 1), "ranks not 1-based in order");
            ties += hits.windows(2).filter(|w| w[0].score == w[1].score).count();
        }
    }
    let took = within(started, Duration::from_secs(30), "retrieval sweep")?;
    Ok(format!("200 instances x k in {{1,4,10}} exact ({ties} tied neighbours), {took:.1?}"))
}

fn parser_round_trip() -> Outcome {
    let corpus = desk_corpus();
    let regulations = corpus.documents().iter().filter(|d| d.doc_kind == DocKind::Regulation).count();
    let chapters = corpus.segments(Level::Chapter).len();
    let articles = corpus.segments(Level::Article).len();
    let clauses = corpus.segments(Level::Clause).len();
    ensure!(regulations >= 3 && chapters >= 2 && articles >= 10 && clauses >= 20, "desk corpus too small");

    for raw in desk_documents() {
        let d1 = parse_document(&raw.text, &raw.id, raw.kind).map_err(|e| e.to_string())?;
        let r1 = render_document(&d1);
        let d2 = parse_document(&r1, &raw.id, raw.kind).map_err(|e| e.to_string())?;
        ensure!(d1 == d2, "{} is not structurally idempotent", raw.id);
        ensure!(render_document(&d2) == r1, "{} renders differently on the second pass", raw.id);
        ensure!(raw.text.split_whitespace().eq(r1.split_whitespace()), "{} lost characters", raw.id);
    }

    let mut runner = TestRunner::new(ProptestConfig {
        cases: 500,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner
        .run(&statute_spec(), |spec| {
            let raw = render_spec(&spec);
            let d1 = parse_document(&raw, "PP-T", DocKind::Regulation).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let r1 = render_document(&d1);
            let d2 = parse_document(&r1, "PP-T", DocKind::Regulation).map_err(|e| TestCaseError::fail(e.to_string()))?;
            proptest::prop_assert_eq!(&d1, &d2);
            proptest::prop_assert_eq!(&render_document(&d2), &r1);
            proptest::prop_assert!(raw.split_whitespace().eq(r1.split_whitespace()));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "desk corpus ({regulations} regulations, {chapters} chapters, {articles} articles, {clauses} clauses) idempotent; 500 random statutes"
    ))
}

fn chunker_reconstruction() -> Outcome {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner
        .run(&(messy_text(), 1usize..64), |(text, size)| {
            let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
            match chunk_text(&text, &ChunkConfig::new(size, 0).unwrap()) {
                Ok(chunks) => {
                    let joined = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
                    proptest::prop_assert_eq!(joined, normalized);
                }
                Err(_) => proptest::prop_assert!(normalized.is_empty()),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let tokens: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let chunks = chunk_text(&tokens.join(" "), &ChunkConfig::new(4, 2).unwrap()).map_err(|e| e.to_string())?;
    let starts: Vec<usize> = chunks
        .iter()
        .map(|c| tokens.iter().position(|t| c.text.split(' ').next() == Some(t.as_str())).unwrap())
        .collect();
    ensure!(starts == [0, 2, 4, 6, 8], "window starts {starts:?}");
    let lens: Vec<usize> = chunks.iter().map(|c| c.token_count).collect();
    ensure!(lens == [4, 4, 4, 4, 2], "window lengths {lens:?}");
    Ok("1000 random texts reconstruct; (10, 4, 2) starts 0,2,4,6,8".into())
}

fn lexrag(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lexrag"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "lexrag {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim());
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn statutes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/statutes")
}

fn task_key(p: &InstructionPair) -> (TaskKind, String) {
    (p.task, p.input.trim().to_string())
}

fn dataset_pipeline() -> Outcome {
    let started = Instant::now();
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let statutes = statutes_dir();
    let statutes = statutes.to_str().unwrap();
    let gen = |out: &str, mode: &str| {
        lexrag(dir, &["--mock-clients", "gen-dataset", "--corpus", statutes, "--out", out, "--fixtures", "fixtures", mode])
    };
    gen("recorded.jsonl", "--record")?;
    gen("dataset.jsonl", "--replay")?;
    let recorded = fs::read(dir.join("recorded.jsonl")).map_err(|e| e.to_string())?;
    let replayed = fs::read(dir.join("dataset.jsonl")).map_err(|e| e.to_string())?;
    ensure!(recorded == replayed, "replayed dataset differs from the recorded one");

    let targets = reference_targets();
    let expected_total: usize = targets.values().sum();
    let text = String::from_utf8(replayed).map_err(|e| e.to_string())?;
    let corpus = desk_corpus();
    let mut counts: BTreeMap<TaskKind, usize> = BTreeMap::new();
    let mut keys = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let value: Value = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        let fields: BTreeSet<&str> = value.as_object().ok_or("record is not an object")?.keys().map(String::as_str).collect();
        ensure!(
            fields == BTreeSet::from(["input", "output", "task", "ref", "provenance"]),
            "line {} has fields {fields:?}",
            i + 1
        );
        let pair: InstructionPair = serde_json::from_value(value).map_err(|e| format!("line {}: {e}", i + 1))?;
        ensure!(pair.is_valid(), "line {} is not a valid pair", i + 1);
        let source = pair.source.as_ref().ok_or(format!("line {} has no ref", i + 1))?;
        let known = match source.level() {
            None => corpus.document(&source.regulation_id).is_some(),
            Some(_) => corpus.resolve(source).is_ok(),
        };
        ensure!(known, "line {} cites unknown {source}", i + 1);
        ensure!(!pair.provenance.is_empty(), "line {} has no provenance", i + 1);
        ensure!(keys.insert(task_key(&pair)), "line {} duplicates an earlier input", i + 1);
        *counts.entry(pair.task).or_default() += 1;
    }
    ensure!(text.lines().count() == expected_total, "{} records, expected {expected_total}", text.lines().count());
    ensure!(counts == targets, "per-task counts {counts:?}");

    let split = |suffix: &str| {
        lexrag(
            dir,
            &["split", "--in", "dataset.jsonl", "--train", &format!("train{suffix}.jsonl"), "--test", &format!("test{suffix}.jsonl"), "--test-fraction", "0.2"],
        )
    };
    split("")?;
    split("-again")?;
    for name in ["train", "test"] {
        let a = fs::read(dir.join(format!("{name}.jsonl"))).map_err(|e| e.to_string())?;
        let b = fs::read(dir.join(format!("{name}-again.jsonl"))).map_err(|e| e.to_string())?;
        ensure!(a == b, "{name} split is not deterministic");
    }
    let train = read_jsonl(&dir.join("train.jsonl")).map_err(|e| e.to_string())?;
    let test = read_jsonl(&dir.join("test.jsonl")).map_err(|e| e.to_string())?;
    let expected_test: usize = targets.values().map(|&n| stratum_test_size(0.2, n)).sum();
    let floor_sum: usize = targets.values().map(|&n| (0.2 * n as f64).floor() as usize).sum();
    ensure!(expected_test == floor_sum, "stratum sizes disagree with the floor sum");
    ensure!(test.len() == expected_test, "|test| = {}, expected {expected_test}", test.len());
    ensure!(train.len() + test.len() == expected_total, "split lost records");
    for (&task, &n) in &targets {
        let t = test.iter().filter(|p| p.task == task).count();
        ensure!(t == stratum_test_size(0.2, n), "{task}: {t} test records");
    }
    let train_keys: BTreeSet<_> = train.iter().map(task_key).collect();
    let test_keys: BTreeSet<_> = test.iter().map(task_key).collect();
    ensure!(train_keys.is_disjoint(&test_keys), "train and test overlap");
    ensure!(train_keys.union(&test_keys).count() == expected_total, "split is not a partition");

    let took = within(started, Duration::from_secs(120), "dataset pipeline")?;
    Ok(format!(
        "{expected_total} records {:?}, record == replay, |test| = {} deterministic and disjoint, {took:.1?}",
        counts.values().collect::<Vec<_>>(),
        test.len()
    ))
}

fn rag_determinism() -> Outcome {
    let corpus = desk_corpus();
    let chunks = chunk_segments(&corpus.leaf_segments(), 512).map_err(|e| e.to_string())?;
    let embed = HashEmbedder::new(256, 7);
    let kb = index(&chunks, &embed).map_err(|e| e.to_string())?.kb;
    let gen = EchoChatClient;
    let cfg = RagConfig::default();
    let system = cfg.prompts.get(DEFAULT_SYSTEM_PROMPT_ID).unwrap().to_string();

    for chunk in kb.entries().iter().map(|e| &e.chunk) {
        let req = QueryRequest::new(chunk.text.clone(), 4);
        let answer = answer_query(&req, Some(&kb), &embed, &gen, &cfg).map_err(|e| e.to_string())?;
        let top = &answer.hits[0];
        ensure!(top.chunk.text == chunk.text, "query for {} ranked {} first", chunk.id, top.chunk.id);
        ensure!(answer.citations.first() == chunk.source.as_ref(), "first citation for {} is {:?}", chunk.id, answer.citations.first());
        let rendered = answer.prompt.render();
        ensure!(answer.text == rendered, "echo answer is not the assembled prompt");
        ensure!(rendered.contains(&system), "prompt lacks the system text");
        ensure!(rendered.contains(chunk.text.trim()), "prompt lacks the user text");
        for block in &answer.prompt.context_blocks {
            ensure!(rendered.contains(&block.text), "prompt lacks retained chunk [{}]", block.rank);
        }

        let mut again = answer_query(&req, Some(&kb), &embed, &gen, &cfg).map_err(|e| e.to_string())?;
        again.latency_ms = answer.latency_ms;
        ensure!(
            serde_json::to_vec(&again).unwrap() == serde_json::to_vec(&answer).unwrap(),
            "second run differs for {}",
            chunk.id
        );
    }

    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let statutes = statutes_dir();
    lexrag(tmp.path(), &["--mock-clients", "index", "--corpus", statutes.to_str().unwrap(), "--out", "kb.lkb"])?;
    let question = ["--mock-clients", "query", "--kb", "kb.lkb", "--k", "4", "Pemerintah daerah wajib mengalokasikan anggaran pendidikan"];
    let first = lexrag(tmp.path(), &question)?;
    let second = lexrag(tmp.path(), &question)?;
    ensure!(first == second, "CLI query output differs between runs");

    let rows: Vec<ResultRow> = [Method::Rag, Method::FineTune, Method::FineTuneRag]
        .into_iter()
        .map(|m| ResultRow { model: "LLaMA2".into(), size: "7B".into(), method: m, bleu: 0.1, meteor: 0.2 })
        .collect();
    let table = render_results_table(&rows);
    let cells: Vec<String> = table.lines().skip(2).filter_map(|l| l.split('|').map(str::trim).nth(2).map(String::from)).collect();
    ensure!(cells == ["RAG", "Fine-tune", "Fine-tune + RAG"], "method column {cells:?}\n{table}");
    Ok(format!("{} self-queries cite their chunk first, reruns identical, table methods {cells:?}", kb.len()))
}

fn kb_persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dim = 48;
    let entries: Vec<KbEntry> = (0..1000)
        .map(|i| KbEntry {
            id: format!("PP-1-2030/{}#{}", i / 3 + 1, i % 3),
            chunk: Chunk {
                id: format!("PP-1-2030/{}#{}", i / 3 + 1, i % 3),
                seq: i % 3,
                source: Some(SourceRef::article("PP-1-2030", (i / 3 + 1) as u32)),
                token_count: 3,
                text: format!("pasal {i} ayat \u{e9}"),
            },
            vector: EmbeddingVector::new((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()),
        })
        .collect();
    let kb = KnowledgeBase::new(dim, entries, "mock-hash-embed/48/0".into(), 1_700_000_000_123).map_err(|e| e.to_string())?;
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let path = tmp.path().join("kb.lkb");
    kb.save(&path).map_err(|e| e.to_string())?;
    let loaded = KnowledgeBase::load(&path).map_err(|e| e.to_string())?;
    ensure!(loaded == kb, "loaded KB differs");
    let bits = |k: &KnowledgeBase| -> Vec<u32> { k.entries().iter().flat_map(|e| e.vector.values().iter().map(|v| v.to_bits())).collect() };
    ensure!(bits(&loaded) == bits(&kb), "vector bits differ");
    let bytes = fs::read(&path).map_err(|e| e.to_string())?;
    ensure!(loaded.to_bytes() == bytes, "re-serialized bytes differ");

    for m in 0..100 {
        let mut corrupt = bytes.clone();
        let pos = rng.gen_range(0..corrupt.len());
        let flip = rng.gen_range(1..=255u8);
        corrupt[pos] ^= flip;
        match KnowledgeBase::from_bytes(&corrupt) {
            Err(KbError::CorruptFile(_)) => {}
            Err(other) => return Err(format!("mutation {m} at byte {pos}: {other}")),
            Ok(_) => return Err(format!("mutation {m} at byte {pos} loaded")),
        }
    }
    Ok(format!("1000 entries, {} bytes bit-exact; 100 byte mutations all CorruptFile", bytes.len()))
}

/// Hash embedder whose index batches wait until enough single-text (query)
/// embeds have started, so the swap provably overlaps in-flight queries.
struct GatedEmbedder {
    inner: HashEmbedder,
    queries: AtomicUsize,
    armed: AtomicBool,
    gate: usize,
}

impl EmbeddingClient for GatedEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        if texts.len() == 1 {
            self.queries.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(3));
        } else if self.armed.load(Ordering::SeqCst) {
            let deadline = Instant::now() + Duration::from_secs(20);
            while self.queries.load(Ordering::SeqCst) < self.gate {
                if Instant::now() > deadline {
                    return Err(ClientError::fatal(self.identity(), "gate never opened"));
                }
                std::thread::sleep(Duration::from_millis(1));
            }
        }
        self.inner.embed(texts)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn identity(&self) -> String {
        self.inner.identity()
    }
}

fn tagged_documents(tag: &str) -> Vec<RawDocument> {
    desk_documents()
        .into_iter()
        .map(|d| RawDocument { id: format!("{tag}{}", d.id), ..d })
        .collect()
}

async fn call(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::builder()
        .method("POST")
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn service_concurrency() -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let embed = Arc::new(GatedEmbedder {
            inner: HashEmbedder::new(64, 5),
            queries: AtomicUsize::new(0),
            armed: AtomicBool::new(false),
            gate: 50,
        });
        let state = AppState::new(ServiceConfig::default(), embed.clone(), Arc::new(EchoChatClient), RagConfig::default());
        let app = router(Arc::new(state));
        let (status, first) = call(&app, "/api/index", json!({ "documents": tagged_documents("A-") })).await;
        ensure!(status == StatusCode::OK, "initial index failed: {first}");
        let mut tag_of: BTreeMap<u64, &str> = BTreeMap::from([(first["kb_version"].as_u64().unwrap(), "A-")]);
        embed.armed.store(true, Ordering::SeqCst);

        let swap = {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "/api/index", json!({ "documents": tagged_documents("B-") })).await })
        };
        let texts = ["dana pendidikan", "sanksi administratif", "guru tunjangan", "laporan semester"];
        let queries: Vec<_> = (0..100)
            .map(|i| {
                let app = app.clone();
                tokio::spawn(async move {
                    tokio::time::sleep(Duration::from_millis(i as u64)).await;
                    call(&app, "/api/query", json!({ "text": texts[i % 4], "k": 4 })).await
                })
            })
            .collect();
        let mut responses = Vec::new();
        for q in queries {
            responses.push(q.await.map_err(|e| e.to_string())?);
        }
        let (status, second) = swap.await.map_err(|e| e.to_string())?;
        ensure!(status == StatusCode::OK, "swap failed: {second}");
        tag_of.insert(second["kb_version"].as_u64().unwrap(), "B-");

        let mut per_version: BTreeMap<u64, usize> = BTreeMap::new();
        for (i, (status, v)) in responses.iter().enumerate() {
            ensure!(*status == StatusCode::OK, "query {i} failed: {v}");
            let version = v["kb_version"].as_u64().ok_or("missing kb_version")?;
            let tag = tag_of.get(&version).ok_or(format!("query {i} saw unknown version {version}"))?;
            let hits = v["hits"].as_array().ok_or("missing hits")?;
            ensure!(hits.len() == 4, "query {i} returned {} hits", hits.len());
            for r in hits.iter().map(|h| &h["ref"]).chain(v["citations"].as_array().unwrap()) {
                ensure!(r.as_str().is_some_and(|s| s.starts_with(tag)), "query {i} on version {version} mixed in {r}");
            }
            *per_version.entry(version).or_default() += 1;
        }
        let old = per_version.get(&first["kb_version"].as_u64().unwrap()).copied().unwrap_or(0);
        ensure!(old >= 50, "only {old} queries overlapped the swap");
        Ok(format!("100 queries OK, one version each, per version {per_version:?}"))
    })
}
