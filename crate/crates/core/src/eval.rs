//! Evaluation metrics (corpus BLEU-4, ROUGE-L, exact match), the naive
//! copy baseline, and length-bucketed reports.
//!
//! Scoring tokenization is whitespace tokens for both code and commit
//! messages (the corpus is whitespace-canonicalized by the pipeline).
//! BLEU uses add-one smoothing on the modified precision counts for
//! n ≥ 2; unigram precision is left unsmoothed so disjoint corpora
//! score exactly 0.

use crate::data::{ws_tokens, PreparedRecord};
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;

/// ROUGE-L F-measure weighting. The default is the harmonic mean
/// (beta = 1); the skew variant uses the beta^2 = 1.2 form of the
/// original definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RougeWeighting {
    Harmonic,
    Skew,
}

impl RougeWeighting {
    fn beta_sq(self) -> f64 {
        match self {
            RougeWeighting::Harmonic => 1.0,
            RougeWeighting::Skew => 1.2,
        }
    }
}

fn check_lengths(candidates: usize, references: usize) -> Result<()> {
    if candidates != references {
        return Err(Error::Input(format!(
            "candidate/reference list lengths differ: {candidates} vs {references}"
        )));
    }
    Ok(())
}

/// Corpus-level BLEU-4 as a percentage.
pub fn bleu4(candidates: &[Vec<&str>], references: &[Vec<&str>]) -> Result<f64> {
    check_lengths(candidates.len(), references.len())?;
    let mut matches = [0u64; 4];
    let mut totals = [0u64; 4];
    let mut cand_len = 0u64;
    let mut ref_len = 0u64;
    for (cand, reference) in candidates.iter().zip(references.iter()) {
        cand_len += cand.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=4usize {
            if cand.len() + 1 <= n {
                continue;
            }
            let mut cand_counts: HashMap<&[&str], u64> = HashMap::new();
            for gram in cand.windows(n) {
                *cand_counts.entry(gram).or_insert(0) += 1;
            }
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            for gram in reference.windows(n) {
                *ref_counts.entry(gram).or_insert(0) += 1;
            }
            for (gram, count) in cand_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
            totals[n - 1] += (cand.len() + 1 - n) as u64;
        }
    }
    if totals[0] == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let (m, t) = if n == 0 {
            (matches[0] as f64, totals[0] as f64)
        } else {
            (matches[n] as f64 + 1.0, totals[n] as f64 + 1.0)
        };
        log_sum += (m / t).ln();
    }
    let bp = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * bp * (log_sum / 4.0).exp())
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            cur[j] = if a[i] == b[j] {
                prev[j + 1] + 1
            } else {
                prev[j].max(cur[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|x| *x = 0);
    }
    prev[0]
}

/// Mean per-pair ROUGE-L F-measure as a percentage.
pub fn rouge_l(candidates: &[Vec<&str>], references: &[Vec<&str>], weighting: RougeWeighting) -> Result<f64> {
    check_lengths(candidates.len(), references.len())?;
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let beta_sq = weighting.beta_sq();
    let mut total = 0.0;
    for (cand, reference) in candidates.iter().zip(references.iter()) {
        if cand.is_empty() || reference.is_empty() {
            continue;
        }
        let lcs = lcs_len(cand, reference) as f64;
        let precision = lcs / cand.len() as f64;
        let recall = lcs / reference.len() as f64;
        let denom = recall + beta_sq * precision;
        if denom > 0.0 {
            total += (1.0 + beta_sq) * recall * precision / denom;
        }
    }
    Ok(100.0 * total / candidates.len() as f64)
}

/// Percentage of candidates token-identical to their reference.
pub fn exact_match(candidates: &[Vec<&str>], references: &[Vec<&str>]) -> Result<f64> {
    check_lengths(candidates.len(), references.len())?;
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let hits = candidates
        .iter()
        .zip(references.iter())
        .filter(|(c, r)| c == r)
        .count();
    Ok(100.0 * hits as f64 / candidates.len() as f64)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TaskScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub exact_match: f64,
    pub count: usize,
}

pub fn score_task(candidates: &[Vec<&str>], references: &[Vec<&str>]) -> Result<TaskScores> {
    Ok(TaskScores {
        bleu4: bleu4(candidates, references)?,
        rouge_l: rouge_l(candidates, references, RougeWeighting::Harmonic)?,
        exact_match: exact_match(candidates, references)?,
        count: candidates.len(),
    })
}

/// Scores within one reference-length bucket; `scores` stays `None`
/// when the bucket is empty (flagged, never divided by zero).
#[derive(Debug, Clone, Serialize)]
pub struct BucketScores {
    pub lo: usize,
    /// exclusive upper edge; None = unbounded last bucket
    pub hi: Option<usize>,
    pub scores: Option<TaskScores>,
}

/// Metrics per reference-length bucket. `edges` are the interior bucket
/// boundaries, e.g. `[10, 20]` buckets into [0,10), [10,20), [20,inf).
pub fn length_bucket_report(
    candidates: &[Vec<&str>],
    references: &[Vec<&str>],
    edges: &[usize],
) -> Result<Vec<BucketScores>> {
    check_lengths(candidates.len(), references.len())?;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("bucket edges must be strictly increasing".into()));
    }
    let mut bounds: Vec<(usize, Option<usize>)> = Vec::new();
    let mut lo = 0usize;
    for &edge in edges {
        bounds.push((lo, Some(edge)));
        lo = edge;
    }
    bounds.push((lo, None));

    let mut report = Vec::new();
    for (lo, hi) in bounds {
        let mut cands: Vec<Vec<&str>> = Vec::new();
        let mut refs: Vec<Vec<&str>> = Vec::new();
        for (c, r) in candidates.iter().zip(references.iter()) {
            let len = r.len();
            if len >= lo && hi.map_or(true, |h| len < h) {
                cands.push(c.clone());
                refs.push(r.clone());
            }
        }
        let scores = if cands.is_empty() {
            None
        } else {
            Some(score_task(&cands, &refs)?)
        };
        report.push(BucketScores { lo, hi, scores });
    }
    Ok(report)
}

/// Per-task metric bundle with length-bucket breakdowns.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub repair: TaskScores,
    pub commit: Option<TaskScores>,
    pub repair_buckets: Vec<BucketScores>,
    pub commit_buckets: Vec<BucketScores>,
    pub sample_count: usize,
}

pub const DEFAULT_CODE_BUCKETS: [usize; 4] = [50, 100, 150, 200];
pub const DEFAULT_MSG_BUCKETS: [usize; 4] = [5, 10, 20, 30];

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize")
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("task,bleu4,rouge_l,exact_match,count\n");
        let row = |task: &str, s: &TaskScores| {
            format!("{task},{:.4},{:.4},{:.4},{}\n", s.bleu4, s.rouge_l, s.exact_match, s.count)
        };
        out.push_str(&row("repair", &self.repair));
        if let Some(commit) = &self.commit {
            out.push_str(&row("commit", commit));
        }
        out
    }

    pub fn buckets_csv(&self) -> String {
        let mut out = String::from("task,lo,hi,bleu4,rouge_l,exact_match,count\n");
        let mut push = |task: &str, buckets: &[BucketScores]| {
            for b in buckets {
                let hi = b.hi.map_or("inf".to_string(), |h| h.to_string());
                match &b.scores {
                    Some(s) => out.push_str(&format!(
                        "{task},{},{hi},{:.4},{:.4},{:.4},{}\n",
                        b.lo, s.bleu4, s.rouge_l, s.exact_match, s.count
                    )),
                    None => out.push_str(&format!("{task},{},{hi},,,,0\n", b.lo)),
                }
            }
        };
        push("repair", &self.repair_buckets);
        push("commit", &self.commit_buckets);
        out
    }
}

/// Score (candidate fixed, candidate message) text pairs against a test
/// corpus. Message candidates are optional (metrics-only repair runs).
pub fn build_report(
    records: &[PreparedRecord],
    fixed_candidates: &[String],
    message_candidates: Option<&[String]>,
) -> Result<EvalReport> {
    check_lengths(fixed_candidates.len(), records.len())?;
    let fixed_refs: Vec<Vec<&str>> = records.iter().map(|r| ws_tokens(&r.fixed)).collect();
    let fixed_cands: Vec<Vec<&str>> = fixed_candidates.iter().map(|c| ws_tokens(c)).collect();
    let repair = score_task(&fixed_cands, &fixed_refs)?;
    let repair_buckets = length_bucket_report(&fixed_cands, &fixed_refs, &DEFAULT_CODE_BUCKETS)?;

    let (commit, commit_buckets) = match message_candidates {
        Some(msgs) => {
            check_lengths(msgs.len(), records.len())?;
            let msg_refs: Vec<Vec<&str>> = records.iter().map(|r| ws_tokens(&r.message)).collect();
            let msg_cands: Vec<Vec<&str>> = msgs.iter().map(|c| ws_tokens(c)).collect();
            (
                Some(score_task(&msg_cands, &msg_refs)?),
                length_bucket_report(&msg_cands, &msg_refs, &DEFAULT_MSG_BUCKETS)?,
            )
        }
        None => (None, Vec::new()),
    };

    Ok(EvalReport {
        repair,
        commit,
        repair_buckets,
        commit_buckets,
        sample_count: records.len(),
    })
}

/// Naive baseline in metrics-only mode: the repaired code is a copy of
/// the buggy input. Commit metrics require a trained model and are left
/// out here.
pub fn naive_baseline(records: &[PreparedRecord]) -> Result<EvalReport> {
    let copies: Vec<String> = records.iter().map(|r| r.buggy.clone()).collect();
    build_report(records, &copies, None)
}
