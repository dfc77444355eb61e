//! Per-topic pseudo-label selection and linear classifier training.
//!
//! The top `positives` hits of a base run are treated as relevant, the bottom
//! `negatives` hits as non-relevant, and a linear model is fit on the
//! L2-normalized tf-idf vectors of those documents.
//!
//! Both objectives are L2-regularized with an unpenalized intercept and a
//! single loss trade-off `cost` (default 1.0):
//!
//! * logistic: 1/2 |w|^2 + cost * sum ln(1 + exp(-y (w.x + b)))
//! * hinge:    1/2 |w|^2 + cost * sum max(0, 1 - y (w.x + b))
//!
//! Training is deterministic: the same training set yields a bit-identical
//! model.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::index::{FeatureVector, InvertedIndex};
use crate::optim;
use crate::rerank::minmax_normalize;
use crate::retrieval::RankedList;

/// Pseudo-label window sizes: `positives` top hits, `negatives` bottom hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudoLabelConfig {
    pub positives: usize,
    pub negatives: usize,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        PseudoLabelConfig {
            positives: 10,
            negatives: 100,
        }
    }
}

impl PseudoLabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positives < 1 || self.negatives < 1 {
            return Err(Error::InvalidParam(
                "pseudo-label window sizes must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which linear model a set of weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    LogisticRegression,
    LinearSvm,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassifierKind::LogisticRegression => write!(f, "lr"),
            ClassifierKind::LinearSvm => write!(f, "svm"),
        }
    }
}

/// Labeled rows: +1 for pseudo-relevant, -1 for pseudo-non-relevant, in
/// deterministic order (positives then negatives, each by rank).
#[derive(Debug, Clone)]
pub struct TrainingSet {
    rows: Vec<(FeatureVector, f64)>,
}

impl TrainingSet {
    pub fn new(rows: Vec<(FeatureVector, f64)>) -> Self {
        debug_assert!(rows.iter().all(|&(_, y)| y == 1.0 || y == -1.0));
        TrainingSet { rows }
    }

    pub fn rows(&self) -> &[(FeatureVector, f64)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.rows.iter().any(|&(_, y)| y > 0.0) && self.rows.iter().any(|&(_, y)| y < 0.0)
    }

    /// Sorted union of the feature ids present in any row.
    pub fn feature_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .rows
            .iter()
            .flat_map(|(x, _)| x.entries().iter().map(|&(id, _)| id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// A trained linear scorer over sparse term-id space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: ClassifierKind,
    pub bias: f64,
    pub cost: f64,
    weights: Vec<(u32, f64)>,
}

impl LinearModel {
    pub fn weights(&self) -> &[(u32, f64)] {
        &self.weights
    }

    /// w.x + b by sorted-id merge.
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        let mut acc = self.bias;
        let (mut i, mut j) = (0, 0);
        let w = &self.weights;
        let e = x.entries();
        while i < w.len() && j < e.len() {
            match w[i].0.cmp(&e[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += w[i].1 * e[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Classifier score: sigmoid of the decision value for logistic
    /// regression, the raw decision value for the SVM.
    pub fn score(&self, x: &FeatureVector) -> f64 {
        match self.kind {
            ClassifierKind::LogisticRegression => sigmoid(self.decision(x)),
            ClassifierKind::LinearSvm => self.decision(x),
        }
    }

    /// Debug dump line: `qid kind bias nnz term:weight ...`.
    pub fn dump_line(&self, qid: &str, index: &InvertedIndex) -> String {
        use std::fmt::Write;
        let mut line = format!("{qid} {} {:.9} {}", self.kind, self.bias, self.weights.len());
        for &(tid, w) in &self.weights {
            write!(line, " {}:{:.9}", index.term(tid), w).unwrap();
        }
        line
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Split a base ranked list into pseudo-positive and pseudo-negative docids:
/// the first `positives` hits and the last `min(negatives, len - positives)`
/// hits. Fails unless the list is strictly longer than `positives`.
pub fn select_pseudo_labels(
    base: &RankedList,
    cfg: &PseudoLabelConfig,
) -> Result<(Vec<String>, Vec<String>)> {
    cfg.validate()?;
    let len = base.len();
    if len <= cfg.positives {
        return Err(Error::ListTooShort {
            qid: base.qid.clone(),
            len,
            positives: cfg.positives,
        });
    }
    let hits = base.hits();
    let positives: Vec<String> = hits[..cfg.positives]
        .iter()
        .map(|h| h.docid.clone())
        .collect();
    let n_neg = cfg.negatives.min(len - cfg.positives);
    let negatives: Vec<String> = hits[len - n_neg..].iter().map(|h| h.docid.clone()).collect();
    Ok((positives, negatives))
}

/// Extract tf-idf vectors for the labeled documents: positives then
/// negatives, each in rank order.
pub fn build_training_set(
    index: &InvertedIndex,
    positives: &[String],
    negatives: &[String],
) -> Result<TrainingSet> {
    let pos_set: std::collections::HashSet<&str> =
        positives.iter().map(String::as_str).collect();
    for docid in negatives {
        if pos_set.contains(docid.as_str()) {
            return Err(Error::OverlappingLabels(docid.clone()));
        }
    }
    let mut rows = Vec::with_capacity(positives.len() + negatives.len());
    for docid in positives {
        rows.push((index.doc_vector(docid)?, 1.0));
    }
    for docid in negatives {
        rows.push((index.doc_vector(docid)?, -1.0));
    }
    Ok(TrainingSet::new(rows))
}

/// Dense view of a training set over its own feature-id union, used by the
/// trainers and by objective/gradient evaluation.
pub struct DenseProblem {
    pub feature_ids: Vec<u32>,
    /// Rows as (dense-position, value) pairs plus the label.
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl DenseProblem {
    pub fn from_training_set(ts: &TrainingSet) -> Self {
        let feature_ids = ts.feature_ids();
        let pos: HashMap<u32, usize> = feature_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let rows = ts
            .rows()
            .iter()
            .map(|(x, y)| {
                let dense_row: Vec<(usize, f64)> = x
                    .entries()
                    .iter()
                    .map(|&(id, v)| (pos[&id], v))
                    .collect();
                (dense_row, *y)
            })
            .collect();
        DenseProblem { feature_ids, rows }
    }

    pub fn dim(&self) -> usize {
        self.feature_ids.len()
    }

    fn margins(&self, wb: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.rows
            .iter()
            .map(|(row, _)| {
                let mut z = wb[d];
                for &(i, v) in row {
                    z += wb[i] * v;
                }
                z
            })
            .collect()
    }

    /// Logistic objective and gradient at `wb` (weights then intercept).
    /// The intercept is unpenalized.
    pub fn logreg_value_grad(&self, cost: f64, wb: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        grad.fill(0.0);
        let mut value = 0.5 * wb[..d].iter().map(|w| w * w).sum::<f64>();
        grad[..d].copy_from_slice(&wb[..d]);
        for ((row, y), z) in self.rows.iter().zip(self.margins(wb)) {
            let t = -y * z;
            // ln(1 + e^t), stable for large |t|
            value += cost * (t.max(0.0) + (-t.abs()).exp().ln_1p());
            let coeff = cost * -y * sigmoid(t);
            for &(i, v) in row {
                grad[i] += coeff * v;
            }
            grad[d] += coeff;
        }
        value
    }

    /// Hinge objective at `wb`.
    pub fn svm_value(&self, cost: f64, wb: &[f64]) -> f64 {
        let d = self.dim();
        let mut value = 0.5 * wb[..d].iter().map(|w| w * w).sum::<f64>();
        for ((_, y), z) in self.rows.iter().zip(self.margins(wb)) {
            value += cost * (1.0 - y * z).max(0.0);
        }
        value
    }

    /// Hinge subgradient at `wb` (derivative taken as 0 at the kink).
    pub fn svm_subgradient(&self, cost: f64, wb: &[f64], grad: &mut [f64]) {
        let d = self.dim();
        grad.fill(0.0);
        grad[..d].copy_from_slice(&wb[..d]);
        for ((row, y), z) in self.rows.iter().zip(self.margins(wb)) {
            if 1.0 - y * z > 0.0 {
                for &(i, v) in row {
                    grad[i] -= cost * y * v;
                }
                grad[d] -= cost * y;
            }
        }
    }
}

const GRAD_TOL: f64 = 1e-6;
const REL_OBJ_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 1000;

fn to_sparse(feature_ids: &[u32], dense: &[f64]) -> Vec<(u32, f64)> {
    feature_ids
        .iter()
        .zip(dense)
        .filter(|&(_, w)| *w != 0.0)
        .map(|(&id, &w)| (id, w))
        .collect()
}

/// Fit L2-regularized logistic regression by full-batch quasi-Newton
/// minimization.
pub fn train_logreg(ts: &TrainingSet, cost: f64) -> Result<LinearModel> {
    if !ts.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let problem = DenseProblem::from_training_set(ts);
    let d = problem.dim();
    let result = optim::lbfgs_minimize(
        vec![0.0; d + 1],
        |wb, grad| problem.logreg_value_grad(cost, wb, grad),
        GRAD_TOL,
        REL_OBJ_TOL,
        MAX_ITERS,
    );
    if !result.converged {
        log::warn!(
            "logistic regression did not converge in {} iterations (objective {:.6e})",
            result.iterations,
            result.value
        );
    }
    Ok(LinearModel {
        kind: ClassifierKind::LogisticRegression,
        bias: result.x[d],
        cost,
        weights: to_sparse(&problem.feature_ids, &result.x[..d]),
    })
}

/// Fit a linear SVM by solving the dual with a working-set method, then
/// recovering the intercept by exact one-dimensional minimization of the
/// primal in b.
pub fn train_svm(ts: &TrainingSet, cost: f64) -> Result<LinearModel> {
    if !ts.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let problem = DenseProblem::from_training_set(ts);
    let m = ts.len();
    let labels: Vec<f64> = ts.rows().iter().map(|&(_, y)| y).collect();
    let kernel: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| ts.rows()[i].0.dot(&ts.rows()[j].0))
                .collect()
        })
        .collect();
    let dual = optim::smo_solve(&kernel, &labels, cost, 1e-10, 500_000);
    if !dual.converged {
        log::warn!(
            "svm dual solver did not converge in {} iterations",
            dual.iterations
        );
    }

    // w = sum_i alpha_i y_i x_i, accumulated in dense feature space.
    let d = problem.dim();
    let mut w = vec![0.0; d];
    for ((row, y), a) in problem.rows.iter().zip(&dual.alpha) {
        if *a != 0.0 {
            for &(i, v) in row {
                w[i] += a * y * v;
            }
        }
    }

    let bias = optimal_hinge_bias(&problem, &w, &labels);
    // Weak duality check: the recovered primal point can never beat the dual bound.
    debug_assert!({
        let mut wb = w.clone();
        wb.push(bias);
        problem.svm_value(cost, &wb) - dual.dual_value >= -1e-9
    });
    Ok(LinearModel {
        kind: ClassifierKind::LinearSvm,
        bias,
        cost,
        weights: to_sparse(&problem.feature_ids, &w),
    })
}

/// Exact minimizer of sum_i max(0, 1 - y_i (z_i + b)) over b: the hinge sum
/// is convex piecewise-linear in b, so scan the breakpoints b = y_i - z_i and
/// return the midpoint of the optimal flat interval.
fn optimal_hinge_bias(problem: &DenseProblem, w: &[f64], labels: &[f64]) -> f64 {
    let z: Vec<f64> = problem
        .rows
        .iter()
        .map(|(row, _)| {
            let mut acc = 0.0;
            for &(i, v) in row {
                acc += w[i] * v;
            }
            acc
        })
        .collect();
    let mut breakpoints: Vec<f64> = labels.iter().zip(&z).map(|(y, zi)| y - zi).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let loss = |b: f64| -> f64 {
        labels
            .iter()
            .zip(&z)
            .map(|(y, zi)| (1.0 - y * (zi + b)).max(0.0))
            .sum()
    };
    let mut best_val = f64::INFINITY;
    let mut best_lo = breakpoints[0];
    let mut best_hi = breakpoints[0];
    for &b in &breakpoints {
        let v = loss(b);
        if v < best_val {
            best_val = v;
            best_lo = b;
            best_hi = b;
        } else if v == best_val {
            best_hi = b;
        }
    }
    0.5 * (best_lo + best_hi)
}

/// Apply a model to a list of documents.
pub fn score_documents(model: &LinearModel, docs: &[FeatureVector]) -> Vec<f64> {
    docs.iter().map(|x| model.score(x)).collect()
}

/// Simple score-averaging ensemble: min-max normalize each list over the
/// topic, then take the element-wise mean.
pub fn ensemble_scores(lr_scores: &[f64], svm_scores: &[f64]) -> Result<Vec<f64>> {
    if lr_scores.len() != svm_scores.len() {
        return Err(Error::ScoreLengthMismatch {
            expected: lr_scores.len(),
            got: svm_scores.len(),
        });
    }
    let a = minmax_normalize(lr_scores)?;
    let b = minmax_normalize(svm_scores)?;
    Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
}
