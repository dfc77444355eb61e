//! Immutable inverted index over an analyzed corpus, with tf-idf document
//! vectors.
//!
//! Documents and terms are interned: ordinals follow lexicographic docid /
//! term order, so a rebuilt index is identical regardless of input order.
//! After `build_index` the structure is read-only and safe to share across
//! threads.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::analyze::analyze;
use crate::error::{Error, Result};

/// One corpus document: a unique identifier and its raw body text.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Document {
    pub docid: String,
    pub text: String,
}

/// Collection-level statistics used by BM25.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CollectionStats {
    pub n_docs: usize,
    /// Mean analyzed document length in tokens; 1.0 when every document is empty.
    pub avgdl: f64,
    pub total_terms: u64,
}

/// Sparse L2-normalized tf-idf vector. Term ids refer to the index that
/// produced it. Entries are sorted by term id and never zero; an empty
/// document yields an empty (all-zero) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Build from raw entries; they must be sorted by term id with no zero
    /// values. Index-produced vectors are always unit-norm, hand-built ones
    /// are the caller's business.
    pub fn from_entries(entries: Vec<(u32, f64)>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].0 < w[1].0),
            "entries must be sorted by term id without duplicates"
        );
        assert!(entries.iter().all(|&(_, v)| v != 0.0), "zero entries are not stored");
        FeatureVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Dot product by sorted-id merge.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Immutable inverted index: postings, document lengths, df and collection
/// stats.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    docids: Vec<String>,
    doc_ords: HashMap<String, u32>,
    /// term id -> [(doc ordinal, tf)], sorted by ordinal (== docid order).
    postings: Vec<Vec<(u32, u32)>>,
    /// doc ordinal -> [(term id, tf)], sorted by term id.
    doc_terms: Vec<Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    stats: CollectionStats,
}

/// Analyze and index a corpus. Fails on a duplicate docid, naming it.
pub fn build_index<I>(docs: I) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = Document>,
{
    let mut analyzed: Vec<(String, Vec<String>)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for doc in docs {
        if doc.docid.is_empty() {
            return Err(Error::InvalidParam("document with empty docid".into()));
        }
        if !seen.insert(doc.docid.clone()) {
            return Err(Error::DuplicateDocId(doc.docid));
        }
        analyzed.push((doc.docid, analyze(&doc.text)));
    }
    analyzed.sort_by(|a, b| a.0.cmp(&b.0));
    InvertedIndex::from_analyzed(analyzed)
}

impl InvertedIndex {
    /// `analyzed` must be sorted by docid with no duplicates.
    pub(crate) fn from_analyzed(analyzed: Vec<(String, Vec<String>)>) -> Result<Self> {
        if analyzed.is_empty() {
            return Err(Error::InvalidParam("corpus is empty".into()));
        }
        let mut term_set: HashSet<&str> = HashSet::new();
        for (_, tokens) in &analyzed {
            for tok in tokens {
                term_set.insert(tok);
            }
        }
        let mut terms: Vec<String> = term_set.into_iter().map(str::to_owned).collect();
        terms.sort_unstable();
        let term_ids: HashMap<String, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let mut docids = Vec::with_capacity(analyzed.len());
        let mut doc_lengths = Vec::with_capacity(analyzed.len());
        let mut doc_terms: Vec<Vec<(u32, u32)>> = Vec::with_capacity(analyzed.len());
        let mut postings: Vec<Vec<(u32, u32)>> = vec![Vec::new(); terms.len()];

        for (ord, (docid, tokens)) in analyzed.into_iter().enumerate() {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for tok in &tokens {
                *counts.entry(term_ids[tok.as_str()]).or_insert(0) += 1;
            }
            let entries: Vec<(u32, u32)> = counts.into_iter().collect();
            for &(tid, tf) in &entries {
                postings[tid as usize].push((ord as u32, tf));
            }
            docids.push(docid);
            doc_lengths.push(tokens.len() as u32);
            doc_terms.push(entries);
        }

        let doc_ords: HashMap<String, u32> = docids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as u32))
            .collect();
        let total_terms: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let n_docs = docids.len();
        let avgdl = if total_terms == 0 {
            1.0
        } else {
            total_terms as f64 / n_docs as f64
        };

        Ok(InvertedIndex {
            terms,
            term_ids,
            docids,
            doc_ords,
            postings,
            doc_terms,
            doc_lengths,
            stats: CollectionStats {
                n_docs,
                avgdl,
                total_terms,
            },
        })
    }

    /// Rebuild from snapshot payload: sorted docids with lengths, sorted
    /// terms with postings. The forward index and stats are rederived and the
    /// tf sums validated against the stored lengths.
    pub(crate) fn from_snapshot_parts(
        docids: Vec<String>,
        doc_lengths: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<(u32, u32)>>,
    ) -> Result<Self> {
        let mut doc_terms: Vec<Vec<(u32, u32)>> = vec![Vec::new(); docids.len()];
        let mut recounted = vec![0u64; docids.len()];
        for (tid, list) in postings.iter().enumerate() {
            for &(ord, tf) in list {
                doc_terms[ord as usize].push((tid as u32, tf));
                recounted[ord as usize] += u64::from(tf);
            }
        }
        for (ord, &total) in recounted.iter().enumerate() {
            if total != u64::from(doc_lengths[ord]) {
                return Err(Error::Snapshot(format!(
                    "document `{}` length {} does not match postings tf sum {}",
                    docids[ord], doc_lengths[ord], total
                )));
            }
        }
        // tids were assigned in ascending term order, so each doc's list is
        // already sorted.
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let doc_ords = docids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as u32))
            .collect();
        let total_terms: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let n_docs = docids.len();
        let avgdl = if total_terms == 0 {
            1.0
        } else {
            total_terms as f64 / n_docs as f64
        };
        Ok(InvertedIndex {
            terms,
            term_ids,
            docids,
            doc_ords,
            postings,
            doc_terms,
            doc_lengths,
            stats: CollectionStats {
                n_docs,
                avgdl,
                total_terms,
            },
        })
    }

    pub fn stats(&self) -> CollectionStats {
        self.stats
    }

    pub fn n_docs(&self) -> usize {
        self.stats.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.stats.avgdl
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, tid: u32) -> &str {
        &self.terms[tid as usize]
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_ord(&self, docid: &str) -> Option<u32> {
        self.doc_ords.get(docid).copied()
    }

    pub fn docid(&self, ord: u32) -> &str {
        &self.docids[ord as usize]
    }

    pub fn docids(&self) -> &[String] {
        &self.docids
    }

    pub fn doc_len(&self, ord: u32) -> u32 {
        self.doc_lengths[ord as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    /// Postings list for a term id: (doc ordinal, tf) sorted by ordinal.
    pub fn postings(&self, tid: u32) -> &[(u32, u32)] {
        &self.postings[tid as usize]
    }

    /// (term id, tf) pairs of one document, sorted by term id.
    pub fn doc_term_counts(&self, ord: u32) -> &[(u32, u32)] {
        &self.doc_terms[ord as usize]
    }

    /// Document frequency; 0 for unseen terms.
    pub fn df(&self, term: &str) -> usize {
        self.term_id(term)
            .map_or(0, |tid| self.postings[tid as usize].len())
    }

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); well-defined for unseen terms (df = 0).
    pub fn idf(&self, term: &str) -> f64 {
        self.idf_from_df(self.df(term))
    }

    pub fn idf_from_df(&self, df: usize) -> f64 {
        let n = self.stats.n_docs as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Term frequency of `term` in `docid`, 0 if absent.
    pub fn tf(&self, term: &str, ord: u32) -> u32 {
        match self.term_id(term) {
            None => 0,
            Some(tid) => self.doc_terms[ord as usize]
                .binary_search_by_key(&tid, |&(t, _)| t)
                .map(|i| self.doc_terms[ord as usize][i].1)
                .unwrap_or(0),
        }
    }

    /// L2-normalized tf-idf vector of an indexed document. An empty document
    /// yields the all-zero vector.
    pub fn doc_vector(&self, docid: &str) -> Result<FeatureVector> {
        let ord = self
            .doc_ord(docid)
            .ok_or_else(|| Error::UnknownDocId(docid.to_string()))?;
        Ok(self.doc_vector_by_ord(ord))
    }

    pub fn doc_vector_by_ord(&self, ord: u32) -> FeatureVector {
        let counts = &self.doc_terms[ord as usize];
        let mut entries: Vec<(u32, f64)> = counts
            .iter()
            .map(|&(tid, tf)| {
                let df = self.postings[tid as usize].len();
                (tid, tf as f64 * self.idf_from_df(df))
            })
            .collect();
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        FeatureVector::from_entries(entries)
    }
}
