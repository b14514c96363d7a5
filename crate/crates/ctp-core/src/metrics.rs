//! Binary-classification evaluation: confusion matrix, accuracy, baseline
//! accuracy, ROC curves and AUC.
//!
//! The decision rule is fixed across the whole crate: a row is predicted
//! positive iff its score is `>= threshold`. Forest vote fractions regularly
//! land exactly on 0.5, so the tie direction is part of the contract.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Label;

/// Counts of the four binary outcomes; `Positive` is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    #[serde(rename = "tn")]
    pub true_negatives: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    /// Element-wise sum, used to pool per-cluster confusions.
    pub fn add(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: self.true_positives + other.true_positives,
            false_positives: self.false_positives + other.false_positives,
            false_negatives: self.false_negatives + other.false_negatives,
            true_negatives: self.true_negatives + other.true_negatives,
        }
    }
}

/// ROC curve points as `(fpr, tpr)`, from (0,0) to (1,1), with the
/// trapezoidal area under them.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels length {labels} does not match scores length {scores}")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("cannot evaluate an empty input")]
    EmptyInput,
    #[error("confusion matrix has zero total count")]
    EmptyMatrix,
    #[error("ROC requires both classes; only one class is present")]
    OneClassOnly,
    #[error("failed to write ROC CSV: {0}")]
    Io(#[from] std::io::Error),
}

/// The crate-wide decision rule: positive iff `score >= threshold`.
pub fn classify(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Counts prediction outcomes at a threshold (conventionally 0.5).
pub fn confusion(
    labels: &[Label],
    scores: &[f64],
    threshold: f64,
) -> Result<ConfusionMatrix, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&label, &score) in labels.iter().zip(scores) {
        match (label, classify(score, threshold)) {
            (Label::Positive, Label::Positive) => cm.true_positives += 1,
            (Label::Negative, Label::Positive) => cm.false_positives += 1,
            (Label::Positive, Label::Negative) => cm.false_negatives += 1,
            (Label::Negative, Label::Negative) => cm.true_negatives += 1,
        }
    }
    Ok(cm)
}

/// `(TP + TN) / (TP + FN + FP + TN)`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok((cm.true_positives + cm.true_negatives) as f64 / total as f64)
}

/// Accuracy of always predicting the majority class.
pub fn baseline_accuracy(labels: &[Label]) -> Result<f64, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    let negatives = labels.len() - positives;
    Ok(positives.max(negatives) as f64 / labels.len() as f64)
}

/// Threshold-sweep ROC curve with trapezoidal AUC.
///
/// Unique score values are visited in descending order, so tied scores move
/// as a block and the curve has one point per distinct score, preceded by
/// (0,0); the sweep always ends at (1,1).
pub fn roc_curve(labels: &[Label], scores: &[f64]) -> Result<RocCurve, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let positives = labels.iter().filter(|l| l.is_positive()).count() as f64;
    let negatives = labels.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(EvalError::OneClassOnly);
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]].is_positive() {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((fp / negatives, tp / positives));
    }

    let auc = points
        .windows(2)
        .map(|pair| {
            let (x0, y0) = pair[0];
            let (x1, y1) = pair[1];
            (x1 - x0) * (y0 + y1) / 2.0
        })
        .sum();
    Ok(RocCurve { points, auc })
}

/// Writes a curve as `fpr,tpr` rows with 9 decimal places.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, out: &mut W) -> Result<(), EvalError> {
    writeln!(out, "fpr,tpr")?;
    for &(fpr, tpr) in &curve.points {
        writeln!(out, "{fpr:.9},{tpr:.9}")?;
    }
    Ok(())
}

/// [`write_roc_csv`] straight to a file path.
pub fn emit_roc_csv(curve: &RocCurve, path: &Path) -> Result<(), EvalError> {
    let mut file = std::fs::File::create(path)?;
    write_roc_csv(curve, &mut file)?;
    Ok(())
}

/// Evaluation summary for one set of scored rows; the pipeline nests these
/// per cluster. `auc` is null when the evaluated rows carry only one class.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
    /// Cluster id to sub-report; `None` marks a cluster that received no
    /// test rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_cluster: Option<BTreeMap<usize, Option<EvaluationReport>>>,
}

/// Builds the flat report for one scored set at a decision threshold.
pub fn evaluate_scores(
    labels: &[Label],
    scores: &[f64],
    threshold: f64,
) -> Result<EvaluationReport, EvalError> {
    let cm = confusion(labels, scores, threshold)?;
    let roc = match roc_curve(labels, scores) {
        Ok(curve) => Some(curve),
        Err(EvalError::OneClassOnly) => None,
        Err(other) => return Err(other),
    };
    Ok(EvaluationReport {
        accuracy: accuracy(&cm)?,
        baseline_accuracy: baseline_accuracy(labels)?,
        auc: roc.as_ref().map(|c| c.auc),
        confusion: cm,
        roc,
        per_cluster: None,
    })
}
