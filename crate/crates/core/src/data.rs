//! Dataset pipeline: turns raw (buggy, fixed, message, language)
//! records into clean training triples with line tags and change
//! representations, then splits them and reports corpus statistics.
//!
//! All text is whitespace-canonicalized on ingestion (per line: trim +
//! single spaces between tokens) so tokenization, diffing, and metric
//! tokenization all see the same form.

use crate::bpe::{BpeModel, CLS_TOKEN, SEP_TOKEN};
use crate::diff::{line_diff, split_lines, LineDiff, Marker};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

pub const MIN_MESSAGE_WORDS: usize = 3;
pub const MAX_MESSAGE_WORDS: usize = 100;
pub const MAX_MESSAGE_FREQ: u64 = 3;

/// Stop words removed from commit messages before the lexical-overlap
/// check. A fixed built-in list; see README for the rationale.
pub const STOP_WORDS: [&str; 52] = [
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "could", "did", "do",
    "does", "for", "from", "had", "has", "have", "if", "in", "into", "is", "it", "its", "may",
    "might", "more", "no", "not", "of", "on", "or", "our", "should", "so", "some", "than", "that",
    "the", "their", "then", "there", "this", "to", "was", "we", "were", "will", "with", "would",
];

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap())
}

/// Collapse every line to single-space-separated tokens; keeps the line
/// structure (including empty lines) intact.
pub fn canonicalize_ws(text: &str) -> String {
    split_lines(text)
        .iter()
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Whitespace tokens of a text; the unit both the statistics and the
/// evaluation metrics count in.
pub fn ws_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// One raw sample as ingested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitRecord {
    pub buggy: String,
    pub fixed: String,
    pub message: String,
    pub language: String,
}

impl CommitRecord {
    /// Canonicalize and enforce the non-empty invariant.
    pub fn new(buggy: &str, fixed: &str, message: &str, language: &str) -> Result<Self> {
        let buggy = canonicalize_ws(buggy);
        let fixed = canonicalize_ws(fixed);
        let message = canonicalize_ws(message);
        if buggy.trim().is_empty() || fixed.trim().is_empty() || message.trim().is_empty() {
            return Err(Error::Input(
                "record has an empty buggy/fixed/message field after trimming".into(),
            ));
        }
        Ok(CommitRecord { buggy, fixed, message, language: language.trim().to_string() })
    }
}

/// One cleaned sample as written by `prepare`: raw texts plus the
/// derived per-line tags and the serialized change representation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PreparedRecord {
    pub buggy: String,
    pub fixed: String,
    pub message: String,
    pub language: String,
    pub line_tags: Vec<u8>,
    pub change_input: String,
    #[serde(default)]
    pub pseudo: bool,
}

/// One encoded sample ready for the models.
#[derive(Debug, Clone)]
pub struct TripleExample {
    pub buggy_ids: Vec<u32>,
    pub cls_positions: Vec<usize>,
    pub line_tags: Vec<u8>,
    pub fixed_ids: Vec<u32>,
    pub message_ids: Vec<u32>,
    pub change_ids: Vec<u32>,
    pub language: String,
}

/// Lowercased-message frequency map over the raw corpus. Counting is on
/// the raw message (before URL stripping); see README for the
/// alternative reading.
pub fn message_frequencies(records: &[CommitRecord]) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for r in records {
        *freq.entry(r.message.trim().to_lowercase()).or_insert(0) += 1;
    }
    freq
}

/// Message filter: URL substrings are stripped before word counting;
/// rejects messages shorter than 3 or longer than 100 words, messages
/// occurring more than 3 times corpus-wide, and messages without a
/// repair pattern ("fix"/"solve", case-insensitive). Returns the
/// cleaned text alongside the verdict.
pub fn filter_message(message: &str, corpus_freq: &BTreeMap<String, u64>) -> (bool, String) {
    let stripped = url_regex().replace_all(message, " ");
    let cleaned = ws_tokens(&stripped).join(" ");
    let words = ws_tokens(&cleaned).len();
    if words < MIN_MESSAGE_WORDS || words > MAX_MESSAGE_WORDS {
        return (false, cleaned);
    }
    let raw_key = message.trim().to_lowercase();
    if corpus_freq.get(&raw_key).copied().unwrap_or(0) > MAX_MESSAGE_FREQ {
        return (false, cleaned);
    }
    let lower = cleaned.to_lowercase();
    if !lower.contains("fix") && !lower.contains("solve") {
        return (false, cleaned);
    }
    (true, cleaned)
}

fn is_change_id_like(token: &str) -> bool {
    // Gerrit-style change ids ("i" + 40 hex) and long hex revision hashes.
    let hex = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_hexdigit());
    if token.len() >= 7 && hex(token) && token.chars().any(|c| c.is_ascii_digit()) {
        return true;
    }
    token.len() == 41 && token.starts_with('i') && hex(&token[1..])
}

/// Split into identifier-ish tokens: runs of alphanumerics/underscores,
/// lowercased.
fn content_tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// True iff at least one content token of the message (stop words,
/// URLs, and change-id-like tokens removed) appears among the code
/// tokens of the buggy or fixed side.
pub fn lexical_overlap_filter(message: &str, buggy: &str, fixed: &str) -> bool {
    let stripped = url_regex().replace_all(message, " ");
    let msg_tokens: BTreeSet<String> = content_tokens(&stripped)
        .into_iter()
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .filter(|t| !is_change_id_like(t))
        .collect();
    if msg_tokens.is_empty() {
        return false;
    }
    let mut code_tokens = content_tokens(buggy);
    code_tokens.extend(content_tokens(fixed));
    msg_tokens.iter().any(|t| code_tokens.contains(t))
}

/// Encoded tagged buggy input: each line prefixed with `[CLS]`.
#[derive(Debug, Clone)]
pub struct TaggedBuggy {
    pub ids: Vec<u32>,
    pub cls_positions: Vec<usize>,
    pub line_tags: Vec<u8>,
}

/// Prefix every buggy line with `[CLS]` and encode; tag 1 marks lines
/// the diff says exist only in the buggy version.
pub fn build_tagged_buggy(
    buggy: &str,
    diff: &LineDiff,
    bpe: &BpeModel,
    language: Option<&str>,
) -> Result<TaggedBuggy> {
    if diff.reconstruct_buggy() != buggy {
        return Err(Error::Contract(
            "diff was not produced from this buggy text (reconstruction mismatch)".into(),
        ));
    }
    let tagged_text = split_lines(buggy)
        .iter()
        .map(|line| {
            if line.is_empty() {
                CLS_TOKEN.to_string()
            } else {
                format!("{CLS_TOKEN} {line}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let ids = bpe.encode(&tagged_text, language)?;
    let cls = bpe.specials.cls;
    let cls_positions: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| id == cls)
        .map(|(i, _)| i)
        .collect();
    let line_tags = diff.buggy_line_tags();
    if cls_positions.len() != line_tags.len() {
        return Err(Error::Contract(format!(
            "tag/line alignment mismatch: {} [CLS] tokens vs {} line tags",
            cls_positions.len(),
            line_tags.len()
        )));
    }
    Ok(TaggedBuggy { ids, cls_positions, line_tags })
}

/// Serialized change representation g(B, F): only changed lines, each
/// prefixed with a direction marker, in alignment order.
pub fn build_change_input(buggy: &str, fixed: &str) -> String {
    let diff = line_diff(buggy, fixed);
    let mut lines = Vec::new();
    for (marker, line) in &diff.entries {
        match marker {
            Marker::BuggyOnly => lines.push(format!("REMOVED: {line}")),
            Marker::FixedOnly => lines.push(format!("ADDED: {line}")),
            Marker::Unchanged => {}
        }
    }
    lines.join("\n")
}

/// Encode a prepared record for the models. With `multilingual`, the
/// buggy/change inputs carry the record's language tag.
pub fn encode_example(record: &PreparedRecord, bpe: &BpeModel, multilingual: bool) -> Result<TripleExample> {
    let language = multilingual.then_some(record.language.as_str());
    let diff = line_diff(&record.buggy, &record.fixed);
    let tagged = build_tagged_buggy(&record.buggy, &diff, bpe, language)?;
    if tagged.line_tags != record.line_tags {
        return Err(Error::Contract("stored line tags disagree with the diff".into()));
    }
    Ok(TripleExample {
        buggy_ids: tagged.ids,
        cls_positions: tagged.cls_positions,
        line_tags: tagged.line_tags,
        fixed_ids: bpe.encode(&record.fixed, None)?,
        message_ids: bpe.encode(&record.message, None)?,
        change_ids: bpe.encode(&record.change_input, language)?,
        language: record.language.clone(),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct LangStats {
    pub count: usize,
    pub avg_tokens_buggy: f64,
    pub avg_lines_buggy: f64,
    pub avg_tokens_commit: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterCounters {
    pub ingested: usize,
    pub rejected_empty_field: usize,
    pub rejected_reserved_token: usize,
    pub rejected_message_filter: usize,
    pub rejected_overlap_filter: usize,
    pub rejected_no_buggy_line: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StatsReport {
    pub per_language: BTreeMap<String, LangStats>,
    pub overall: LangStats,
    pub split_sizes: (usize, usize, usize),
    pub counters: FilterCounters,
    /// value → occurrence count histograms
    pub hist_buggy_tokens: BTreeMap<usize, u64>,
    pub hist_commit_tokens: BTreeMap<usize, u64>,
    /// 1-based index of the first buggy line per example
    pub hist_first_buggy_line: BTreeMap<usize, u64>,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// One row per language present in the corpus.
    pub fn per_language_csv(&self) -> String {
        let mut out = String::from("language,count,avg_tokens_buggy,avg_lines_buggy,avg_tokens_commit\n");
        for (lang, s) in &self.per_language {
            out.push_str(&format!(
                "{lang},{},{:.4},{:.4},{:.4}\n",
                s.count, s.avg_tokens_buggy, s.avg_lines_buggy, s.avg_tokens_commit
            ));
        }
        out
    }

    pub fn histogram_csv(hist: &BTreeMap<usize, u64>, value_name: &str) -> String {
        let mut out = format!("{value_name},count\n");
        for (value, count) in hist {
            out.push_str(&format!("{value},{count}\n"));
        }
        out
    }
}

fn lang_stats(records: &[&PreparedRecord]) -> LangStats {
    let n = records.len();
    if n == 0 {
        return LangStats::default();
    }
    let tokens_buggy: usize = records.iter().map(|r| ws_tokens(&r.buggy).len()).sum();
    let lines_buggy: usize = records.iter().map(|r| split_lines(&r.buggy).len()).sum();
    let tokens_commit: usize = records.iter().map(|r| ws_tokens(&r.message).len()).sum();
    LangStats {
        count: n,
        avg_tokens_buggy: tokens_buggy as f64 / n as f64,
        avg_lines_buggy: lines_buggy as f64 / n as f64,
        avg_tokens_commit: tokens_commit as f64 / n as f64,
    }
}

pub fn compute_stats(
    records: &[PreparedRecord],
    counters: FilterCounters,
    split_sizes: (usize, usize, usize),
) -> StatsReport {
    let mut per_language: BTreeMap<String, Vec<&PreparedRecord>> = BTreeMap::new();
    for r in records {
        per_language.entry(r.language.clone()).or_default().push(r);
    }
    let mut hist_buggy_tokens = BTreeMap::new();
    let mut hist_commit_tokens = BTreeMap::new();
    let mut hist_first_buggy_line = BTreeMap::new();
    for r in records {
        *hist_buggy_tokens.entry(ws_tokens(&r.buggy).len()).or_insert(0) += 1;
        *hist_commit_tokens.entry(ws_tokens(&r.message).len()).or_insert(0) += 1;
        if let Some(first) = r.line_tags.iter().position(|&t| t == 1) {
            *hist_first_buggy_line.entry(first + 1).or_insert(0) += 1;
        }
    }
    StatsReport {
        per_language: per_language
            .into_iter()
            .map(|(l, rs)| (l.clone(), lang_stats(&rs)))
            .collect(),
        overall: lang_stats(&records.iter().collect::<Vec<_>>()),
        split_sizes,
        counters,
        hist_buggy_tokens,
        hist_commit_tokens,
        hist_first_buggy_line,
    }
}

/// Seeded shuffle followed by a contiguous split at the cumulative
/// ratio boundaries. Statistics cover the whole corpus.
pub fn split_and_stats(
    examples: &[PreparedRecord],
    ratios: (f64, f64, f64),
    seed: u64,
    counters: FilterCounters,
) -> Result<(Vec<PreparedRecord>, Vec<PreparedRecord>, Vec<PreparedRecord>, StatsReport)> {
    if examples.is_empty() {
        return Err(Error::Input("cannot split an empty corpus".into()));
    }
    let (tr, va, te) = ratios;
    if tr < 0.0 || va < 0.0 || te < 0.0 || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "split ratios must be non-negative and sum to 1, got ({tr}, {va}, {te})"
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = examples.len();
    let train_end = (tr * n as f64).floor() as usize;
    let valid_end = ((tr + va) * n as f64).floor() as usize;
    let pick = |range: std::ops::Range<usize>| -> Vec<PreparedRecord> {
        order[range].iter().map(|&i| examples[i].clone()).collect()
    };
    let train = pick(0..train_end);
    let valid = pick(train_end..valid_end);
    let test = pick(valid_end..n);
    let sizes = (train.len(), valid.len(), test.len());
    let stats = compute_stats(examples, counters, sizes);
    Ok((train, valid, test, stats))
}

pub struct PreparedCorpus {
    pub train: Vec<PreparedRecord>,
    pub valid: Vec<PreparedRecord>,
    pub test: Vec<PreparedRecord>,
    pub bpe: BpeModel,
    pub stats: StatsReport,
}

pub struct PrepareOptions {
    pub num_merges: usize,
    pub languages: Vec<String>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            num_merges: 2000,
            languages: crate::bpe::DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            ratios: (0.8, 0.1, 0.1),
            seed: 17,
        }
    }
}

/// Full preparation pass: filters → diffs → tagging → BPE → splits →
/// statistics.
pub fn prepare_corpus(raw: &[CommitRecord], opts: &PrepareOptions) -> Result<PreparedCorpus> {
    let mut counters = FilterCounters { ingested: raw.len(), ..Default::default() };
    let freq = message_frequencies(raw);

    let mut kept: Vec<PreparedRecord> = Vec::new();
    for record in raw {
        let reserved = [CLS_TOKEN, SEP_TOKEN];
        if reserved.iter().any(|t| {
            ws_tokens(&record.buggy).contains(t)
                || ws_tokens(&record.fixed).contains(t)
                || ws_tokens(&record.message).contains(t)
        }) {
            counters.rejected_reserved_token += 1;
            continue;
        }
        let (accepted, cleaned) = filter_message(&record.message, &freq);
        if !accepted {
            counters.rejected_message_filter += 1;
            continue;
        }
        if !lexical_overlap_filter(&cleaned, &record.buggy, &record.fixed) {
            counters.rejected_overlap_filter += 1;
            continue;
        }
        let diff = line_diff(&record.buggy, &record.fixed);
        let line_tags = diff.buggy_line_tags();
        if !line_tags.contains(&1) {
            counters.rejected_no_buggy_line += 1;
            continue;
        }
        let change_input = build_change_input(&record.buggy, &record.fixed);
        kept.push(PreparedRecord {
            buggy: record.buggy.clone(),
            fixed: record.fixed.clone(),
            message: cleaned,
            language: record.language.clone(),
            line_tags,
            change_input,
            pseudo: false,
        });
    }
    counters.kept = kept.len();
    if kept.is_empty() {
        return Err(Error::Input(
            "no records survived filtering; refusing to write an empty corpus".into(),
        ));
    }

    // Shared vocabulary over every text surface the models consume.
    let mut bpe_corpus: Vec<String> = Vec::with_capacity(kept.len() * 4);
    for r in &kept {
        bpe_corpus.push(r.buggy.clone());
        bpe_corpus.push(r.fixed.clone());
        bpe_corpus.push(r.message.clone());
        bpe_corpus.push(r.change_input.clone());
    }
    let bpe = crate::bpe::learn_bpe(&bpe_corpus, opts.num_merges, &opts.languages)?;

    let (train, valid, test, stats) = split_and_stats(&kept, opts.ratios, opts.seed, counters)?;
    Ok(PreparedCorpus { train, valid, test, bpe, stats })
}

pub fn read_raw_jsonl(path: &Path) -> Result<Vec<CommitRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    let mut dropped_empty = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: CommitRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Input(format!("{}:{}: malformed record: {e}", path.display(), lineno + 1))
        })?;
        match CommitRecord::new(&raw.buggy, &raw.fixed, &raw.message, &raw.language) {
            Ok(r) => out.push(r),
            Err(_) => dropped_empty += 1,
        }
    }
    if out.is_empty() {
        return Err(Error::Input(format!(
            "{}: no usable records ({} dropped for empty fields)",
            path.display(),
            dropped_empty
        )));
    }
    Ok(out)
}

pub fn write_prepared_jsonl(path: &Path, records: &[PreparedRecord]) -> Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).expect("record serialize"));
        buf.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_prepared_jsonl(path: &Path) -> Result<Vec<PreparedRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PreparedRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Input(format!("{}:{}: malformed record: {e}", path.display(), lineno + 1))
        })?;
        out.push(r);
    }
    Ok(out)
}
