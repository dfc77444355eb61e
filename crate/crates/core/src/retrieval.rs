//! Base-run production: BM25 ranking and RM3 query expansion with a second
//! weighted-query retrieval pass.
//!
//! The BM25 variant is the Lucene-style one: idf = ln(1 + (N-df+0.5)/(df+0.5))
//! with no (k1+1) numerator factor. Query term weights form a probability
//! distribution (plain queries use maximum-likelihood weights), so scores are
//! a positive rescaling of the classic sum — rank-identical. Ties are always
//! broken by ascending docid.

use std::collections::{BTreeMap, HashMap};

use crate::analyze::analyze;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;

/// BM25 parameters: tf saturation k1 and length normalization b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParam(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParam(format!("b must be in [0,1], got {}", self.b)));
        }
        Ok(())
    }
}

/// RM3 parameters: feedback depth, expansion width, and the interpolation
/// weight on the original query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub orig_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Rm3Params {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: 0.5,
        }
    }
}

impl Rm3Params {
    pub fn validate(&self) -> Result<()> {
        if self.fb_docs < 1 {
            return Err(Error::InvalidParam("fb_docs must be >= 1".into()));
        }
        if self.fb_terms < 1 {
            return Err(Error::InvalidParam("fb_terms must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.orig_weight) {
            return Err(Error::InvalidParam(format!(
                "orig_weight must be in [0,1], got {}",
                self.orig_weight
            )));
        }
        Ok(())
    }
}

/// An analyzed topic: id plus query tokens (repeats carry weight).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTopic {
    pub qid: String,
    pub terms: Vec<String>,
}

impl QueryTopic {
    pub fn from_text(qid: &str, text: &str) -> Self {
        QueryTopic {
            qid: qid.to_string(),
            terms: analyze(text),
        }
    }

    /// Maximum-likelihood term distribution of the query.
    pub fn to_weighted(&self) -> Result<WeightedQuery> {
        if self.terms.is_empty() {
            return Err(Error::EmptyQuery(self.qid.clone()));
        }
        let share = 1.0 / self.terms.len() as f64;
        let mut weights: BTreeMap<&str, f64> = BTreeMap::new();
        for t in &self.terms {
            *weights.entry(t).or_insert(0.0) += share;
        }
        WeightedQuery::new(
            weights
                .into_iter()
                .map(|(t, w)| (t.to_string(), w))
                .collect(),
        )
    }
}

/// Non-negative term weights summing to 1, sorted by term. Zero-weight
/// entries are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    entries: Vec<(String, f64)>,
}

impl WeightedQuery {
    pub fn new(mut entries: Vec<(String, f64)>) -> Result<Self> {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.is_empty() {
            return Err(Error::InvalidParam("weighted query has no mass".into()));
        }
        let mut total = 0.0;
        for i in 1..entries.len() {
            if entries[i - 1].0 == entries[i].0 {
                return Err(Error::InvalidParam(format!(
                    "duplicate query term `{}`",
                    entries[i].0
                )));
            }
        }
        for &(ref term, w) in &entries {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "query term `{term}` has non-positive weight {w}"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "query weights sum to {total}, expected 1"
            )));
        }
        Ok(WeightedQuery { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.entries
            .binary_search_by(|(t, _)| t.as_str().cmp(term))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }
}

/// One scored hit; rank is its 1-based position in the list.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub docid: String,
    pub score: f64,
}

/// A per-topic ranked list: scores non-increasing, docids unique, ranks are
/// the positions 1..=len.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub qid: String,
    pub tag: String,
    hits: Vec<Hit>,
}

impl RankedList {
    pub fn new(qid: &str, tag: &str, hits: Vec<Hit>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (i, hit) in hits.iter().enumerate() {
            if !hit.score.is_finite() {
                return Err(Error::InvalidRankedList {
                    qid: qid.to_string(),
                    reason: format!("non-finite score at rank {}", i + 1),
                });
            }
            if i > 0 && hits[i - 1].score < hit.score {
                return Err(Error::InvalidRankedList {
                    qid: qid.to_string(),
                    reason: format!("score increases at rank {}", i + 1),
                });
            }
            if !seen.insert(hit.docid.as_str()) {
                return Err(Error::InvalidRankedList {
                    qid: qid.to_string(),
                    reason: format!("duplicate docid `{}`", hit.docid),
                });
            }
        }
        Ok(RankedList {
            qid: qid.to_string(),
            tag: tag.to_string(),
            hits,
        })
    }

    pub fn hits(&self) -> &[Hit] {
        &self.hits
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn docids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.docid.as_str())
    }

    /// docid -> 1-based rank.
    pub fn rank_of(&self) -> HashMap<&str, usize> {
        self.hits
            .iter()
            .enumerate()
            .map(|(i, h)| (h.docid.as_str(), i + 1))
            .collect()
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = tag.to_string();
        self
    }
}

/// A full run: per-topic ranked lists keyed (and therefore emitted) by qid.
pub type Run = BTreeMap<String, RankedList>;

/// BM25 contribution of one term to one document: idf * tf / (tf + k1*(1 - b + b*dl/avgdl)).
/// Zero when the term is absent from the document.
pub fn bm25_term_score(
    index: &InvertedIndex,
    params: &Bm25Params,
    term: &str,
    docid: &str,
) -> Result<f64> {
    let ord = index
        .doc_ord(docid)
        .ok_or_else(|| Error::UnknownDocId(docid.to_string()))?;
    let tf = index.tf(term, ord);
    if tf == 0 {
        return Ok(0.0);
    }
    Ok(bm25_component(
        index.idf(term),
        tf,
        index.doc_len(ord),
        index.avgdl(),
        params,
    ))
}

/// The raw per-term BM25 factor for given statistics.
#[inline]
pub fn bm25_component(idf: f64, tf: u32, dl: u32, avgdl: f64, params: &Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = params.k1 * (1.0 - params.b + params.b * f64::from(dl) / avgdl);
    idf * tf / (tf + norm)
}

/// Score the whole collection against a weighted query and keep the top `k`
/// matching documents. Ties break by ascending docid. Only documents that
/// contain at least one query term are returned.
pub fn search(
    index: &InvertedIndex,
    qid: &str,
    query: &WeightedQuery,
    params: &Bm25Params,
    k: usize,
    tag: &str,
) -> Result<RankedList> {
    params.validate()?;
    if k < 1 {
        return Err(Error::InvalidParam("retrieval depth k must be >= 1".into()));
    }
    if query.entries().is_empty() {
        return Err(Error::EmptyQuery(qid.to_string()));
    }
    let mut scores: HashMap<u32, f64> = HashMap::new();
    // Query entries are sorted by term, so each accumulator sees additions in
    // a fixed order and the totals are bit-reproducible.
    for (term, weight) in query.entries() {
        let Some(tid) = index.term_id(term) else {
            continue;
        };
        let idf = index.idf_from_df(index.postings(tid).len());
        for &(ord, tf) in index.postings(tid) {
            let s = weight * bm25_component(idf, tf, index.doc_len(ord), index.avgdl(), params);
            *scores.entry(ord).or_insert(0.0) += s;
        }
    }
    let mut scored: Vec<(u32, f64)> = scores.into_iter().collect();
    scored.sort_unstable_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.docid(a.0).cmp(index.docid(b.0)))
    });
    scored.truncate(k);
    let hits = scored
        .into_iter()
        .map(|(ord, score)| Hit {
            docid: index.docid(ord).to_string(),
            score,
        })
        .collect();
    RankedList::new(qid, tag, hits)
}

/// Relevance-model estimate from the top `fb_docs` feedback documents:
/// P(w|R) = sum_d omega_d * tf(w,d)/dl(d) with omega_d the score-normalized
/// document weight. Returns a term distribution sorted by term.
pub fn rm1_estimate(
    index: &InvertedIndex,
    base: &RankedList,
    fb_docs: usize,
) -> Result<Vec<(String, f64)>> {
    if base.is_empty() {
        return Err(Error::InvalidRankedList {
            qid: base.qid.clone(),
            reason: "empty base list for feedback".into(),
        });
    }
    let window = &base.hits()[..fb_docs.min(base.len())];
    let mut mass = 0.0;
    for hit in window {
        if hit.score < 0.0 {
            return Err(Error::NegativeFeedbackScore(base.qid.clone()));
        }
        mass += hit.score;
    }
    if mass <= 0.0 {
        return Err(Error::ZeroFeedbackMass(base.qid.clone()));
    }
    let mut dist: BTreeMap<String, f64> = BTreeMap::new();
    for hit in window {
        let ord = index
            .doc_ord(&hit.docid)
            .ok_or_else(|| Error::UnknownDocId(hit.docid.clone()))?;
        let dl = index.doc_len(ord);
        if dl == 0 {
            continue;
        }
        let doc_weight = hit.score / mass;
        for &(tid, tf) in index.doc_term_counts(ord) {
            *dist.entry(index.term(tid).to_string()).or_insert(0.0) +=
                doc_weight * f64::from(tf) / f64::from(dl);
        }
    }
    Ok(dist.into_iter().collect())
}

/// Interpolate the original query's MLE distribution with the truncated,
/// renormalized relevance model: weight(t) = lambda*mle(t) + (1-lambda)*rm(t).
pub fn rm3_expand(
    original: &QueryTopic,
    rm1: &[(String, f64)],
    params: &Rm3Params,
) -> Result<WeightedQuery> {
    params.validate()?;
    let original_mle = original.to_weighted()?;

    // Top fb_terms by probability, ties by lexicographic term.
    let mut ranked: Vec<&(String, f64)> = rm1.iter().filter(|&&(_, p)| p > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(params.fb_terms);
    let kept_mass: f64 = ranked.iter().map(|&&(_, p)| p).sum();

    let lambda = params.orig_weight;
    let mut combined: BTreeMap<String, f64> = BTreeMap::new();
    for (term, w) in original_mle.entries() {
        *combined.entry(term.clone()).or_insert(0.0) += lambda * w;
    }
    if kept_mass > 0.0 {
        for &&(ref term, p) in &ranked {
            *combined.entry(term.clone()).or_insert(0.0) += (1.0 - lambda) * (p / kept_mass);
        }
    } else if lambda == 0.0 {
        return Err(Error::InvalidParam(
            "relevance model is empty and orig_weight is 0".into(),
        ));
    } else {
        // No expansion mass: fall back to the original distribution.
        return original.to_weighted();
    }
    WeightedQuery::new(combined.into_iter().collect())
}

/// One-pass BM25 run over a set of topics.
pub fn bm25_run(
    index: &InvertedIndex,
    topics: &[QueryTopic],
    params: &Bm25Params,
    k: usize,
    tag: &str,
) -> Result<Run> {
    let mut run = Run::new();
    for topic in topics {
        let list = search(index, &topic.qid, &topic.to_weighted()?, params, k, tag)?;
        run.insert(topic.qid.clone(), list);
    }
    Ok(run)
}

/// Two-pass BM25+RM3 run: BM25 pass, relevance-model estimation, expanded
/// weighted-query second pass.
pub fn rm3_run(
    index: &InvertedIndex,
    topics: &[QueryTopic],
    bm25: &Bm25Params,
    rm3: &Rm3Params,
    k: usize,
    tag: &str,
) -> Result<Run> {
    rm3.validate()?;
    let mut run = Run::new();
    for topic in topics {
        let first = search(index, &topic.qid, &topic.to_weighted()?, bm25, k, tag)?;
        let expanded = if first.is_empty() {
            log::warn!(
                "topic {}: first pass returned no documents, skipping expansion",
                topic.qid
            );
            topic.to_weighted()?
        } else {
            let rm1 = rm1_estimate(index, &first, rm3.fb_docs)?;
            rm3_expand(topic, &rm1, rm3)?
        };
        let second = search(index, &topic.qid, &expanded, bm25, k, tag)?;
        run.insert(topic.qid.clone(), second);
    }
    Ok(run)
}
