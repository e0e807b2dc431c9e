//! Independent reference implementations and generators shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use proptest::prelude::*;

/// Brute-force BLEU, written directly from the definition.
///
/// N-grams are compared as slices; clipping counts each distinct
/// hypothesis n-gram once against its reference occurrences.
pub fn bleu_oracle(hyp: &[&str], refr: &[&str], max_n: usize, smoothing: bool, epsilon: f64) -> f64 {
    assert!(!refr.is_empty());
    if hyp.is_empty() {
        return 0.0;
    }
    let n_max = max_n.min(hyp.len());
    let weight = 1.0 / n_max as f64;
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let hyp_grams: Vec<&[&str]> = (0..=hyp.len() - n).map(|i| &hyp[i..i + n]).collect();
        let ref_grams: Vec<&[&str]> = if refr.len() >= n {
            (0..=refr.len() - n).map(|i| &refr[i..i + n]).collect()
        } else {
            Vec::new()
        };
        let mut clipped = 0usize;
        for (i, g) in hyp_grams.iter().enumerate() {
            if hyp_grams[..i].contains(g) {
                continue;
            }
            let in_hyp = hyp_grams.iter().filter(|x| *x == g).count();
            let in_ref = ref_grams.iter().filter(|x| *x == g).count();
            clipped += in_hyp.min(in_ref);
        }
        let matches = if clipped > 0 {
            clipped as f64
        } else if n > 1 && smoothing {
            epsilon
        } else {
            return 0.0;
        };
        log_sum += weight * (matches / hyp_grams.len() as f64).ln();
    }
    let bp = if hyp.len() >= refr.len() {
        1.0
    } else {
        (1.0 - refr.len() as f64 / hyp.len() as f64).exp()
    };
    bp * log_sum.exp()
}

/// Every partial one-to-one matching of equal tokens, by exhaustive recursion.
fn all_matchings(hyp: &[&str], refr: &[&str]) -> Vec<Vec<(usize, usize)>> {
    fn go(i: usize, hyp: &[&str], refr: &[&str], used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == hyp.len() {
            out.push(cur.clone());
            return;
        }
        go(i + 1, hyp, refr, used, cur, out);
        for j in 0..refr.len() {
            if !used[j] && refr[j] == hyp[i] {
                used[j] = true;
                cur.push((i, j));
                go(i + 1, hyp, refr, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, hyp, refr, &mut vec![false; refr.len()], &mut Vec::new(), &mut out);
    out
}

fn chunk_count(pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let continues = k > 0 && pairs[k - 1] == (i.wrapping_sub(1), j.wrapping_sub(1));
        if !continues {
            chunks += 1;
        }
    }
    chunks
}

/// `(matches, chunks)` of the best alignment: most matches, then fewest chunks.
pub fn meteor_alignment_oracle(hyp: &[&str], refr: &[&str]) -> (usize, usize) {
    all_matchings(hyp, refr)
        .iter()
        .map(|m| (m.len(), chunk_count(m)))
        .min_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)))
        .unwrap_or((0, 0))
}

pub fn meteor_oracle(hyp: &[&str], refr: &[&str], alpha: f64, beta: f64, gamma: f64) -> f64 {
    assert!(!refr.is_empty());
    if hyp.is_empty() {
        return 0.0;
    }
    let (m, chunks) = meteor_alignment_oracle(hyp, refr);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / refr.len() as f64;
    let fmean = p * r / (alpha * p + (1.0 - alpha) * r);
    let penalty = gamma * (chunks as f64 / m as f64).powf(beta);
    fmean * (1.0 - penalty)
}

/// Every sequence of length `1..=max_len` over `alphabet`.
pub fn all_sequences<'a>(alphabet: &[&'a str], max_len: usize) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![Vec::new()];
    for _ in 0..max_len {
        let next: Vec<Vec<&str>> = layer
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Top-k entry indices by full stable sort on cosine (descending).
pub fn topk_oracle(vectors: &[Vec<f32>], query: &[f32], k: usize) -> Vec<usize> {
    let norm = |v: &[f32]| v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let qn = norm(query);
    let mut scored: Vec<(usize, f64)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let dot: f64 = v.iter().zip(query).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            (i, (dot / (qn * norm(v))).clamp(-1.0, 1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored.into_iter().take(k).map(|(i, _)| i).collect()
}

const WORDS: &[&str] = &[
    "setiap", "warga", "negara", "pemerintah", "daerah", "wajib", "menyelenggarakan", "pendidikan", "dasar",
    "satuan", "peserta", "didik", "guru", "dana", "izin", "sanksi", "administratif", "menteri", "laporan",
    "standar", "nasional", "berlaku", "sebagaimana", "dimaksud", "ayat", "huruf", "a.", "b.", "20%", "tahun",
];

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(WORDS).prop_map(str::to_string)
}

/// Text of 1..=max words, optionally wrapped across lines.
fn prose(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..=max)
}

fn wrap(words: &[String], breaks: &[bool]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(if breaks.get(i).copied().unwrap_or(false) { "\n" } else { " " });
        }
        out.push_str(w);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ArticleSpec {
    pub preamble: Option<Vec<String>>,
    pub clauses: Vec<Vec<String>>,
    pub breaks: Vec<bool>,
}

/// Optional title words and the chapter's articles.
pub type ChapterSpec = (Option<Vec<String>>, Vec<ArticleSpec>);

#[derive(Debug, Clone)]
pub struct StatuteSpec {
    pub front: Vec<Vec<String>>,
    pub chapters: Option<Vec<ChapterSpec>>,
    pub flat_articles: Vec<ArticleSpec>,
    pub pad: bool,
}

fn article_spec() -> impl Strategy<Value = ArticleSpec> {
    (
        prop::option::of(prose(8)),
        prop::collection::vec(prose(10), 0..4),
        prop::collection::vec(any::<bool>(), 12),
    )
        .prop_filter("article needs text", |(p, c, _)| p.is_some() || !c.is_empty())
        .prop_map(|(preamble, clauses, breaks)| ArticleSpec { preamble, clauses, breaks })
}

pub fn statute_spec() -> impl Strategy<Value = StatuteSpec> {
    (
        prop::collection::vec(prose(5), 0..3),
        prop::option::of(prop::collection::vec(
            (prop::option::of(prose(3)), prop::collection::vec(article_spec(), 1..4)),
            1..4,
        )),
        prop::collection::vec(article_spec(), 1..4),
        any::<bool>(),
    )
        .prop_map(|(front, chapters, flat_articles, pad)| StatuteSpec { front, chapters, flat_articles, pad })
}

const ROMAN: [&str; 5] = ["I", "II", "III", "IV", "V"];

/// Raw statute text for a spec, with wrapped lines and optional padding whitespace.
pub fn render_spec(spec: &StatuteSpec) -> String {
    let mut lines: Vec<String> = spec.front.iter().map(|l| l.join(" ")).collect();
    let mut article_no = 0u32;
    let mut push_article = |a: &ArticleSpec, lines: &mut Vec<String>| {
        article_no += 1;
        lines.push(format!("Pasal {article_no}"));
        if let Some(p) = &a.preamble {
            lines.push(wrap(p, &a.breaks));
        }
        for (i, c) in a.clauses.iter().enumerate() {
            lines.push(format!("({}) {}", i + 1, wrap(c, &a.breaks)));
        }
    };
    match &spec.chapters {
        Some(chapters) => {
            for (ci, (title, articles)) in chapters.iter().enumerate() {
                lines.push(format!("BAB {}", ROMAN[ci]));
                if let Some(t) = title {
                    lines.push(t.join(" ").to_uppercase());
                }
                for a in articles {
                    push_article(a, &mut lines);
                }
            }
        }
        None => {
            for a in &spec.flat_articles {
                push_article(a, &mut lines);
            }
        }
    }
    if spec.pad {
        lines.iter().map(|l| format!("  {}\t ", l.replace(' ', "  "))).collect::<Vec<_>>().join("\r\n")
    } else {
        lines.join("\n")
    }
}

/// Random texts for chunker tests: words separated by assorted whitespace.
pub fn messy_text() -> impl Strategy<Value = String> {
    prop::collection::vec((word(), prop::sample::select(vec![" ", "  ", "\n", "\t", " \r\n "])), 0..200)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}
