//! Final-run production: interpolate normalized retrieval and classifier
//! scores and re-sort each topic's list.
//!
//! Both score sets are min-max normalized per topic before interpolation
//! (BM25/RM3 ranges differ per topic, LR emits probabilities, the SVM emits
//! unbounded margins). `alpha` weighs the retrieval side. The output docid
//! set is always exactly the base run's: this stage only reranks.

use std::collections::HashMap;
use std::str::FromStr;

use crate::classify::{
    ensemble_scores, score_documents, select_pseudo_labels, train_logreg, train_svm, LinearModel,
    PseudoLabelConfig, TrainingSet,
};
use crate::error::{Error, Result};
use crate::index::{FeatureVector, InvertedIndex};
use crate::retrieval::{Hit, RankedList, Run};

/// Interpolation weight on the (normalized) retrieval score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationParams {
    pub alpha: f64,
}

impl InterpolationParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in [0,1], got {alpha}"
            )));
        }
        Ok(InterpolationParams { alpha })
    }
}

/// Which classifier signal drives the rerank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RerankMethod {
    LogisticRegression,
    LinearSvm,
    Ensemble,
}

impl std::fmt::Display for RerankMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RerankMethod::LogisticRegression => write!(f, "lr"),
            RerankMethod::LinearSvm => write!(f, "svm"),
            RerankMethod::Ensemble => write!(f, "ensemble"),
        }
    }
}

impl FromStr for RerankMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(RerankMethod::LogisticRegression),
            "svm" => Ok(RerankMethod::LinearSvm),
            "ensemble" => Ok(RerankMethod::Ensemble),
            other => Err(Error::InvalidParam(format!(
                "unknown classifier `{other}` (expected lr, svm or ensemble)"
            ))),
        }
    }
}

/// (s - min) / (max - min); a constant list maps to all 0.5.
pub fn minmax_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.5; scores.len()]);
    }
    let range = max - min;
    Ok(scores.iter().map(|s| (s - min) / range).collect())
}

/// Combine normalized retrieval and classifier scores and re-sort:
/// final(d) = alpha * norm(retrieval)(d) + (1-alpha) * norm(classifier)(d).
/// Ties keep base order. Every base docid must have a classifier score.
pub fn interpolate_rerank(
    base: &RankedList,
    clf_scores: &HashMap<String, f64>,
    params: &InterpolationParams,
) -> Result<RankedList> {
    InterpolationParams::new(params.alpha)?;
    let retrieval: Vec<f64> = base.hits().iter().map(|h| h.score).collect();
    let clf: Vec<f64> = base
        .hits()
        .iter()
        .map(|h| {
            clf_scores
                .get(&h.docid)
                .copied()
                .ok_or_else(|| Error::MissingClassifierScore {
                    qid: base.qid.clone(),
                    docid: h.docid.clone(),
                })
        })
        .collect::<Result<_>>()?;
    let norm_ret = minmax_normalize(&retrieval)?;
    let norm_clf = minmax_normalize(&clf)?;

    let mut order: Vec<usize> = (0..base.len()).collect();
    let finals: Vec<f64> = norm_ret
        .iter()
        .zip(&norm_clf)
        .map(|(r, c)| params.alpha * r + (1.0 - params.alpha) * c)
        .collect();
    // Base rank (== index) breaks ties, so docid never decides; it stays in
    // the chain for total-order clarity.
    order.sort_by(|&a, &b| {
        finals[b]
            .total_cmp(&finals[a])
            .then_with(|| a.cmp(&b))
            .then_with(|| base.hits()[a].docid.cmp(&base.hits()[b].docid))
    });
    let hits: Vec<Hit> = order
        .into_iter()
        .map(|i| Hit {
            docid: base.hits()[i].docid.clone(),
            score: finals[i],
        })
        .collect();
    RankedList::new(&base.qid, &base.tag, hits)
}

/// Result of a whole-run rerank.
#[derive(Debug)]
pub struct RerankOutcome {
    pub run: Run,
    /// Topics emitted unchanged because no classifier could be trained.
    pub passed_through: Vec<String>,
    /// Trained models per topic (two per topic for the ensemble).
    pub models: Vec<(String, LinearModel)>,
}

/// Classifier cost parameter used throughout (package-default trade-off).
pub const DEFAULT_COST: f64 = 1.0;

/// Per-topic classifier scores for one base list, aligned with its hits.
pub(crate) fn classifier_scores(
    index: &InvertedIndex,
    base: &RankedList,
    cfg: &PseudoLabelConfig,
    method: RerankMethod,
    models_out: Option<&mut Vec<(String, LinearModel)>>,
) -> Result<Vec<f64>> {
    let docs: Vec<_> = base
        .hits()
        .iter()
        .map(|h| index.doc_vector(&h.docid))
        .collect::<Result<_>>()?;
    classifier_scores_with_docs(base, &docs, cfg, method, models_out)
}

/// Same as [`classifier_scores`] but over pre-extracted document vectors
/// (aligned with the base hits), so grid sweeps extract each vector once.
pub(crate) fn classifier_scores_with_docs(
    base: &RankedList,
    docs: &[FeatureVector],
    cfg: &PseudoLabelConfig,
    method: RerankMethod,
    models_out: Option<&mut Vec<(String, LinearModel)>>,
) -> Result<Vec<f64>> {
    // Window selection is shared with build_training_set; the rows here are
    // the already-extracted vectors for those ranks.
    let (positives, negatives) = select_pseudo_labels(base, cfg)?;
    let mut rows = Vec::with_capacity(positives.len() + negatives.len());
    for doc in &docs[..positives.len()] {
        rows.push((doc.clone(), 1.0));
    }
    let neg_start = base.len() - negatives.len();
    for doc in &docs[neg_start..] {
        rows.push((doc.clone(), -1.0));
    }
    let ts = TrainingSet::new(rows);
    let (scores, trained) = match method {
        RerankMethod::LogisticRegression => {
            let model = train_logreg(&ts, DEFAULT_COST)?;
            (score_documents(&model, docs), vec![model])
        }
        RerankMethod::LinearSvm => {
            let model = train_svm(&ts, DEFAULT_COST)?;
            (score_documents(&model, docs), vec![model])
        }
        RerankMethod::Ensemble => {
            let lr = train_logreg(&ts, DEFAULT_COST)?;
            let svm = train_svm(&ts, DEFAULT_COST)?;
            let combined =
                ensemble_scores(&score_documents(&lr, docs), &score_documents(&svm, docs))?;
            (combined, vec![lr, svm])
        }
    };
    if let Some(out) = models_out {
        for model in trained {
            out.push((base.qid.clone(), model));
        }
    }
    Ok(scores)
}

/// Full pipeline over a base run: pseudo-labels, per-topic training, scoring,
/// interpolation. Topics too short to train pass through unchanged with a
/// warning. At alpha = 1.0 the classifier cannot influence the output and the
/// base run is returned as-is (bit-identical, including scores and tags).
pub fn prf_rerank_run(
    index: &InvertedIndex,
    base_run: &Run,
    cfg: &PseudoLabelConfig,
    method: RerankMethod,
    params: &InterpolationParams,
) -> Result<RerankOutcome> {
    // At alpha = 1.0 interpolation degenerates to the (monotone) normalized
    // retrieval score, so the ordering is the base ordering; short-circuit so
    // the emitted run is the base run byte for byte.
    cfg.validate()?;
    InterpolationParams::new(params.alpha)?;
    if params.alpha == 1.0 {
        return Ok(RerankOutcome {
            run: base_run.clone(),
            passed_through: Vec::new(),
            models: Vec::new(),
        });
    }
    let tag = format!(
        "prf-{method}-r{}-n{}-a{}",
        cfg.positives, cfg.negatives, params.alpha
    );
    let mut run = Run::new();
    let mut passed_through = Vec::new();
    let mut models = Vec::new();
    for (qid, base) in base_run {
        match classifier_scores(index, base, cfg, method, Some(&mut models)) {
            Ok(scores) => {
                let by_docid: HashMap<String, f64> = base
                    .hits()
                    .iter()
                    .zip(&scores)
                    .map(|(h, &s)| (h.docid.clone(), s))
                    .collect();
                let list = interpolate_rerank(base, &by_docid, params)?.with_tag(&tag);
                run.insert(qid.clone(), list);
            }
            Err(Error::ListTooShort { .. }) => {
                log::warn!(
                    "topic {qid}: list too short for pseudo-labels, passing through unchanged"
                );
                passed_through.push(qid.clone());
                run.insert(qid.clone(), base.clone());
            }
            Err(other) => return Err(other),
        }
    }
    Ok(RerankOutcome {
        run,
        passed_through,
        models,
    })
}
