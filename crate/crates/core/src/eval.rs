//! Run evaluation: average precision at depth, MAP, the paired two-tailed
//! t-test with exact p-values, Kendall's tau at rank cutoffs, and per-topic
//! delta buckets.
//!
//! Topics with no relevant judgment are excluded from MAP and the t-test
//! (the usual trec_eval convention). Unjudged documents count as
//! non-relevant.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::retrieval::{RankedList, Run};
use crate::stats::student_t_two_tailed;

/// Relevance judgments: (qid, docid) -> integer grade, relevant iff > 0.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    grades: BTreeMap<String, HashMap<String, i32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    /// Insert one judgment. Returns the previous grade when (qid, docid) was
    /// already judged (the new grade wins).
    pub fn insert(&mut self, qid: &str, docid: &str, grade: i32) -> Option<i32> {
        self.grades
            .entry(qid.to_string())
            .or_default()
            .insert(docid.to_string(), grade)
    }

    pub fn grade(&self, qid: &str, docid: &str) -> Option<i32> {
        self.grades.get(qid).and_then(|m| m.get(docid)).copied()
    }

    pub fn is_relevant(&self, qid: &str, docid: &str) -> bool {
        self.grade(qid, docid).is_some_and(|g| g > 0)
    }

    /// Number of relevant documents judged for a topic.
    pub fn relevant_count(&self, qid: &str) -> usize {
        self.grades
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g > 0).count())
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    /// Docids judged for a topic, in arbitrary order.
    pub fn judged_docids(&self, qid: &str) -> Vec<String> {
        self.grades
            .get(qid)
            .map_or_else(Vec::new, |m| m.keys().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Average precision of one topic at `depth`:
/// (1/R) * sum of precision@i over relevant retrieved ranks i <= depth,
/// with R the total number of relevant judgments for the topic.
pub fn average_precision(topic: &RankedList, qrels: &Qrels, depth: usize) -> f64 {
    let total_relevant = qrels.relevant_count(&topic.qid);
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits_so_far = 0usize;
    let mut acc = 0.0;
    for (i, hit) in topic.hits().iter().take(depth).enumerate() {
        if qrels.is_relevant(&topic.qid, &hit.docid) {
            hits_so_far += 1;
            acc += hits_so_far as f64 / (i + 1) as f64;
        }
    }
    acc / total_relevant as f64
}

/// Per-topic AP plus the arithmetic mean over evaluable topics (those with
/// at least one relevant judgment). Errors when no topic is evaluable.
pub fn mean_ap(run: &Run, qrels: &Qrels, depth: usize) -> Result<(f64, BTreeMap<String, f64>)> {
    let mut per_topic = BTreeMap::new();
    for (qid, list) in run {
        if qrels.relevant_count(qid) > 0 {
            per_topic.insert(qid.clone(), average_precision(list, qrels, depth));
        }
    }
    if per_topic.is_empty() {
        return Err(Error::NoEvaluableTopics);
    }
    let map = per_topic.values().sum::<f64>() / per_topic.len() as f64;
    Ok((map, per_topic))
}

/// Paired two-tailed t-test outcome.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_delta: f64,
}

/// Paired two-tailed t-test over the common topics of two per-topic AP maps.
/// Differences are b - a. Degenerate cases: all-zero differences give
/// (t=0, p=1); zero variance with nonzero mean gives p=0 with a warning.
pub fn paired_t_test(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<TTest> {
    let diffs: Vec<f64> = a
        .iter()
        .filter_map(|(qid, &av)| b.get(qid).map(|&bv| bv - av))
        .collect();
    let m = diffs.len();
    if m < 2 {
        return Err(Error::TooFewTopics { needed: 2, got: m });
    }
    let mean = diffs.iter().sum::<f64>() / m as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    let df = m - 1;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTest {
                t: 0.0,
                p: 1.0,
                df,
                mean_delta: 0.0,
            });
        }
        log::warn!("paired t-test: zero variance with nonzero mean, p collapses to 0");
        return Ok(TTest {
            t: if mean > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            p: 0.0,
            df,
            mean_delta: mean,
        });
    }
    let t = mean / (var.sqrt() / (m as f64).sqrt());
    Ok(TTest {
        t,
        p: student_t_two_tailed(t, df),
        df,
        mean_delta: mean,
    })
}

/// Kendall's tau between the base-run ordering and the final-run ordering of
/// the base run's top-k docids. The final run must rank the same docid set.
/// `k` larger than the list clamps to the full length.
pub fn kendall_tau_at_k(base: &RankedList, final_run: &RankedList, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam(format!(
            "tau cutoff must be >= 2, got {k}"
        )));
    }
    if base.len() != final_run.len() {
        return Err(Error::NotAPermutation {
            qid: base.qid.clone(),
            reason: format!("lengths differ: {} vs {}", base.len(), final_run.len()),
        });
    }
    let final_rank = final_run.rank_of();
    for hit in base.hits() {
        if !final_rank.contains_key(hit.docid.as_str()) {
            return Err(Error::NotAPermutation {
                qid: base.qid.clone(),
                reason: format!("docid `{}` missing from final run", hit.docid),
            });
        }
    }
    let k = k.min(base.len());
    if k < 2 {
        return Err(Error::InvalidParam(
            "ranked list too short for a tau cutoff".into(),
        ));
    }
    // Base top-k docids in base order, mapped to their final ranks: the
    // number of inversions in that sequence is the discordant pair count.
    let seq: Vec<usize> = base.hits()[..k]
        .iter()
        .map(|h| final_rank[h.docid.as_str()])
        .collect();
    let total_pairs = k * (k - 1) / 2;
    let discordant = count_inversions(&seq);
    Ok((total_pairs as f64 - 2.0 * discordant as f64) / total_pairs as f64)
}

/// Merge-sort inversion count, O(n log n).
fn count_inversions(seq: &[usize]) -> u64 {
    fn sort_count(v: &mut Vec<usize>, scratch: &mut Vec<usize>) -> u64 {
        let n = v.len();
        if n <= 1 {
            return 0;
        }
        let mid = n / 2;
        let mut right = v.split_off(mid);
        let mut count = sort_count(v, scratch) + sort_count(&mut right, scratch);
        scratch.clear();
        let (mut i, mut j) = (0, 0);
        while i < v.len() && j < right.len() {
            if v[i] <= right[j] {
                scratch.push(v[i]);
                i += 1;
            } else {
                count += (v.len() - i) as u64;
                scratch.push(right[j]);
                j += 1;
            }
        }
        scratch.extend_from_slice(&v[i..]);
        scratch.extend_from_slice(&right[j..]);
        v.clear();
        v.extend_from_slice(scratch);
        count
    }
    let mut v = seq.to_vec();
    let mut scratch = Vec::with_capacity(v.len());
    sort_count(&mut v, &mut scratch)
}

/// Per-topic AP delta buckets at a threshold (strict inequalities on both
/// sides).
#[derive(Debug, Clone, serde::Serialize)]
pub struct DeltaReport {
    pub helped: usize,
    pub hurt: usize,
    pub unchanged: usize,
    pub threshold: f64,
    /// (qid, base AP, candidate AP, delta)
    pub per_topic: Vec<(String, f64, f64, f64)>,
}

/// Bucket topics by AP change: helped if b - a > threshold, hurt if
/// a - b > threshold, unchanged otherwise.
pub fn delta_analysis(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    threshold: f64,
) -> Result<DeltaReport> {
    let mut report = DeltaReport {
        helped: 0,
        hurt: 0,
        unchanged: 0,
        threshold,
        per_topic: Vec::new(),
    };
    for (qid, &av) in a {
        let Some(&bv) = b.get(qid) else { continue };
        let delta = bv - av;
        if delta > threshold {
            report.helped += 1;
        } else if -delta > threshold {
            report.hurt += 1;
        } else {
            report.unchanged += 1;
        }
        report.per_topic.push((qid.clone(), av, bv, delta));
    }
    if report.per_topic.is_empty() {
        return Err(Error::TooFewTopics { needed: 1, got: 0 });
    }
    Ok(report)
}

/// The standard cutoffs for the tau analysis.
pub const DEFAULT_TAU_CUTOFFS: &[usize] = &[10, 20, 50, 100, 200, 500, 1000];

/// Default threshold separating helped/hurt topics from unchanged ones.
pub const DEFAULT_DELTA_THRESHOLD: f64 = 0.01;

/// Full comparison of a base and a final run against the same qrels.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub base_map: f64,
    pub cand_map: f64,
    pub base_per_topic: BTreeMap<String, f64>,
    pub cand_per_topic: BTreeMap<String, f64>,
    pub delta: DeltaReport,
    pub t_test: TTest,
    /// cutoff -> per-topic (qid, tau), for topics present in both runs.
    pub tau_at_k: BTreeMap<usize, Vec<(String, f64)>>,
}

/// Evaluate base and candidate runs and assemble the full analysis:
/// per-topic AP, MAP, delta buckets, paired t-test and per-topic tau at each
/// cutoff.
pub fn compare_runs(
    base: &Run,
    cand: &Run,
    qrels: &Qrels,
    depth: usize,
    cutoffs: &[usize],
    threshold: f64,
) -> Result<EvalReport> {
    let (base_map, base_per_topic) = mean_ap(base, qrels, depth)?;
    let (cand_map, cand_per_topic) = mean_ap(cand, qrels, depth)?;
    let delta = delta_analysis(&base_per_topic, &cand_per_topic, threshold)?;
    let t_test = paired_t_test(&base_per_topic, &cand_per_topic)?;
    let mut tau_at_k = BTreeMap::new();
    for &k in cutoffs {
        let mut taus = Vec::new();
        for (qid, base_list) in base {
            let Some(final_list) = cand.get(qid) else {
                continue;
            };
            if base_list.len() < 2 {
                continue;
            }
            taus.push((qid.clone(), kendall_tau_at_k(base_list, final_list, k)?));
        }
        tau_at_k.insert(k, taus);
    }
    Ok(EvalReport {
        base_map,
        cand_map,
        base_per_topic,
        cand_per_topic,
        delta,
        t_test,
        tau_at_k,
    })
}

/// Sanity helper for tests and tools: insist two lists rank the same docids.
pub fn same_docid_set(a: &RankedList, b: &RankedList) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let sa: HashSet<&str> = a.docids().collect();
    b.docids().all(|d| sa.contains(d))
}
