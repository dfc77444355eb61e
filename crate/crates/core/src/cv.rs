//! Cross-validated parameter tuning over the (positives, negatives, alpha)
//! grid.
//!
//! Topics are split into deterministic folds (sorted, round-robin). For each
//! fold every grid point is scored by mean AP on the training topics only;
//! the winner is applied to the held-out topics and the final run is the
//! concatenation of the per-fold test outputs. Test MAP is computed only
//! after selection.

use std::collections::BTreeMap;

use crate::classify::PseudoLabelConfig;
use crate::error::{Error, Result};
use crate::eval::{average_precision, mean_ap, Qrels};
use crate::index::{FeatureVector, InvertedIndex};
use crate::rerank::{
    classifier_scores_with_docs, interpolate_rerank, InterpolationParams, RerankMethod,
};
use crate::retrieval::{RankedList, Run};

/// Tuning grid and fold count.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub positives_grid: Vec<usize>,
    pub negatives_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
}

/// 0.0, 0.1, ..., 1.0.
pub fn tenth_alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            positives_grid: vec![10, 20, 30],
            negatives_grid: vec![100],
            alpha_grid: tenth_alpha_grid(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParam("folds must be >= 2".into()));
        }
        if self.positives_grid.is_empty()
            || self.negatives_grid.is_empty()
            || self.alpha_grid.is_empty()
        {
            return Err(Error::InvalidParam("empty tuning grid".into()));
        }
        for &r in &self.positives_grid {
            if r < 1 {
                return Err(Error::InvalidParam("positives grid values must be >= 1".into()));
            }
        }
        for &n in &self.negatives_grid {
            if n < 1 {
                return Err(Error::InvalidParam("negatives grid values must be >= 1".into()));
            }
        }
        for &a in &self.alpha_grid {
            InterpolationParams::new(a)?;
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.positives_grid.len() * self.negatives_grid.len() * self.alpha_grid.len()
    }
}

/// One train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub fold_id: usize,
    pub test_qids: Vec<String>,
    pub train_qids: Vec<String>,
}

/// Deterministic folds: qids sorted lexicographically, assigned round-robin.
/// Fold sizes differ by at most one.
pub fn make_folds(qids: &[String], k: usize) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParam("folds must be >= 2".into()));
    }
    let mut sorted: Vec<String> = qids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < k {
        return Err(Error::TooFewTopics {
            needed: k,
            got: sorted.len(),
        });
    }
    let mut folds: Vec<Fold> = (0..k)
        .map(|fold_id| Fold {
            fold_id,
            test_qids: Vec::new(),
            train_qids: Vec::new(),
        })
        .collect();
    for (i, qid) in sorted.iter().enumerate() {
        folds[i % k].test_qids.push(qid.clone());
    }
    for fold in &mut folds {
        fold.train_qids = sorted
            .iter()
            .filter(|q| !fold.test_qids.contains(q))
            .cloned()
            .collect();
    }
    Ok(folds)
}

/// One grid configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub positives: usize,
    pub negatives: usize,
    pub alpha: f64,
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "r={} n={} alpha={}",
            self.positives, self.negatives, self.alpha
        )
    }
}

/// The configuration chosen for one fold and its training-set MAP.
#[derive(Debug, Clone)]
pub struct FoldChoice {
    pub fold_id: usize,
    pub point: GridPoint,
    pub train_map: f64,
    pub test_qids: Vec<String>,
}

/// Cross-validation outcome: the stitched final run, per-fold choices, and
/// the final-run MAP (computed after all selections).
#[derive(Debug)]
pub struct CvOutcome {
    pub run: Run,
    pub choices: Vec<FoldChoice>,
    pub map: f64,
}

/// Per-topic precomputation shared by every grid point.
struct TopicCache {
    qid: String,
    base_ap: f64,
    /// Classifier scores per (positives, negatives) pair; None when the
    /// topic is too short to train.
    clf: Vec<Option<Vec<f64>>>,
}

/// Pick the best grid point by train MAP; ties prefer larger alpha, then
/// smaller positives, then smaller negatives.
fn select_best(points: &[GridPoint], train_map: impl Fn(usize) -> f64) -> (usize, f64) {
    let mut best_idx = 0;
    let mut best_map = f64::NEG_INFINITY;
    for (idx, point) in points.iter().enumerate() {
        let map = train_map(idx);
        let better = map > best_map || {
            map == best_map && {
                let b = points[best_idx];
                point.alpha > b.alpha
                    || (point.alpha == b.alpha
                        && (point.positives < b.positives
                            || (point.positives == b.positives
                                && point.negatives < b.negatives)))
            }
        };
        if better {
            best_idx = idx;
            best_map = map;
        }
    }
    (best_idx, best_map)
}

/// Cross-validated grid search over a base run.
pub fn grid_search_cv(
    index: &InvertedIndex,
    base_run: &Run,
    qrels: &Qrels,
    cfg: &CvConfig,
    method: RerankMethod,
    depth: usize,
) -> Result<CvOutcome> {
    cfg.validate()?;
    let evaluable: Vec<String> = base_run
        .keys()
        .filter(|qid| qrels.relevant_count(qid) > 0)
        .cloned()
        .collect();
    if evaluable.is_empty() {
        return Err(Error::NoEvaluableTopics);
    }
    let folds = make_folds(&evaluable, cfg.folds)?;

    let rn_pairs: Vec<(usize, usize)> = cfg
        .positives_grid
        .iter()
        .flat_map(|&r| cfg.negatives_grid.iter().map(move |&n| (r, n)))
        .collect();
    let points: Vec<GridPoint> = rn_pairs
        .iter()
        .flat_map(|&(r, n)| {
            cfg.alpha_grid.iter().map(move |&alpha| GridPoint {
                positives: r,
                negatives: n,
                alpha,
            })
        })
        .collect();

    // Train once per topic per (r, n); every alpha reuses the scores.
    let mut caches: Vec<TopicCache> = Vec::with_capacity(evaluable.len());
    for qid in &evaluable {
        let base = &base_run[qid];
        let docs: Vec<FeatureVector> = base
            .hits()
            .iter()
            .map(|h| index.doc_vector(&h.docid))
            .collect::<Result<_>>()?;
        let mut clf = Vec::with_capacity(rn_pairs.len());
        for &(r, n) in &rn_pairs {
            let window = PseudoLabelConfig {
                positives: r,
                negatives: n,
            };
            match classifier_scores_with_docs(base, &docs, &window, method, None) {
                Ok(scores) => clf.push(Some(scores)),
                Err(Error::ListTooShort { .. }) => {
                    log::warn!(
                        "topic {qid}: too short for r={r}, treating that grid row as pass-through"
                    );
                    clf.push(None);
                }
                Err(other) => return Err(other),
            }
        }
        caches.push(TopicCache {
            qid: qid.clone(),
            base_ap: average_precision(base, qrels, depth),
            clf,
        });
    }

    // AP per grid point per topic.
    let n_alpha = cfg.alpha_grid.len();
    let mut ap_table: Vec<Vec<f64>> = vec![vec![0.0; caches.len()]; points.len()];
    for (rn_idx, _) in rn_pairs.iter().enumerate() {
        for (t_idx, cache) in caches.iter().enumerate() {
            let base = &base_run[&cache.qid];
            for (a_idx, &alpha) in cfg.alpha_grid.iter().enumerate() {
                let p_idx = rn_idx * n_alpha + a_idx;
                ap_table[p_idx][t_idx] = match (&cache.clf[rn_idx], alpha == 1.0) {
                    (None, _) | (_, true) => cache.base_ap,
                    (Some(scores), false) => {
                        let list = rerank_with_scores(base, scores, alpha)?;
                        average_precision(&list, qrels, depth)
                    }
                };
            }
        }
    }

    let topic_idx: BTreeMap<&str, usize> = caches
        .iter()
        .enumerate()
        .map(|(i, c)| (c.qid.as_str(), i))
        .collect();

    let mut run = Run::new();
    let mut choices = Vec::with_capacity(folds.len());
    for fold in &folds {
        let train_idxs: Vec<usize> = fold
            .train_qids
            .iter()
            .map(|q| topic_idx[q.as_str()])
            .collect();
        let (best_idx, train_map) = select_best(&points, |p_idx| {
            train_idxs
                .iter()
                .map(|&t| ap_table[p_idx][t])
                .sum::<f64>()
                / train_idxs.len() as f64
        });
        let chosen = points[best_idx];
        let rn_idx = best_idx / n_alpha;
        let tag = format!(
            "prf-cv-f{}-{method}-r{}-n{}-a{}",
            fold.fold_id, chosen.positives, chosen.negatives, chosen.alpha
        );
        for qid in &fold.test_qids {
            let cache = &caches[topic_idx[qid.as_str()]];
            let base = &base_run[qid];
            let list = match (&cache.clf[rn_idx], chosen.alpha == 1.0) {
                (None, _) | (_, true) => base.clone(),
                (Some(scores), false) => {
                    rerank_with_scores(base, scores, chosen.alpha)?.with_tag(&tag)
                }
            };
            run.insert(qid.clone(), list);
        }
        choices.push(FoldChoice {
            fold_id: fold.fold_id,
            point: chosen,
            train_map,
            test_qids: fold.test_qids.clone(),
        });
    }

    // Topics without relevant judgments cannot be tuned; emit them unchanged.
    for (qid, base) in base_run {
        if !topic_idx.contains_key(qid.as_str()) {
            log::warn!("topic {qid}: no relevant judgments, passing base list through");
            run.insert(qid.clone(), base.clone());
        }
    }

    let (map, _) = mean_ap(&run, qrels, depth)?;
    Ok(CvOutcome { run, choices, map })
}

fn rerank_with_scores(base: &RankedList, scores: &[f64], alpha: f64) -> Result<RankedList> {
    let by_docid: std::collections::HashMap<String, f64> = base
        .hits()
        .iter()
        .zip(scores)
        .map(|(h, &s)| (h.docid.clone(), s))
        .collect();
    interpolate_rerank(base, &by_docid, &InterpolationParams { alpha })
}
