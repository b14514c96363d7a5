//! Linear baselines: logistic regression and a linear soft-margin SVM.
//!
//! Both train by full-batch (sub)gradient descent over the sparse count
//! matrix, so fitting is deterministic. Logistic regression minimizes the
//! mean negative log-likelihood plus an L2 penalty on the weights (bias
//! unregularized) with a backtracking step rule that keeps the loss strictly
//! decreasing. The SVM minimizes `l2_lambda/2 * ||w||^2 + mean hinge` with
//! the decaying step size `learning_rate / (l2_lambda * t)`.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FeatureMatrix, SparseRow};

/// Backtracking cannot shrink the step below this floor.
pub const LEARNING_RATE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Svm,
}

/// Optimizer bookkeeping kept on the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    /// Number of accepted steps (logistic) or epochs run (SVM).
    pub iterations: usize,
    pub final_loss: f64,
    /// Objective after initialization and after every accepted step/epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: ModelKind,
    pub training_meta: TrainingMeta,
}

impl LinearModel {
    pub fn n_cols(&self) -> usize {
        self.weights.len()
    }

    /// Scores every row of a matrix over the training columns.
    pub fn scores(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, LinearError> {
        if matrix.n_cols() != self.n_cols() {
            return Err(LinearError::DimensionMismatch {
                expected: self.n_cols(),
                got: matrix.n_cols(),
            });
        }
        (0..matrix.n_rows())
            .map(|i| linear_score(self, matrix.row(i)))
            .collect()
    }

    /// JSON export: `{kind, weights, bias}`.
    pub fn export_json(&self) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            kind: ModelKind,
            weights: &'a [f64],
            bias: f64,
        }
        serde_json::to_string(&Export {
            kind: self.kind,
            weights: &self.weights,
            bias: self.bias,
        })
        .expect("linear model export cannot fail")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
}

impl GdConfig {
    pub fn logistic_default() -> Self {
        Self {
            learning_rate: 0.1,
            l2_lambda: 1e-3,
            epochs: 200,
        }
    }

    pub fn svm_default() -> Self {
        Self {
            learning_rate: 1.0,
            l2_lambda: 1e-3,
            epochs: 200,
        }
    }
}

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("labels length {labels} does not match row count {rows}")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("cannot fit on zero rows")]
    EmptyTraining,
    #[error("loss became non-finite; learning rate too large even after backtracking floor")]
    NonFiniteLoss,
    #[error("the SVM step schedule is undefined at l2_lambda = 0")]
    LambdaZero,
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot_sparse(row: &SparseRow, weights: &[f64]) -> f64 {
    row.iter().map(|&(col, v)| v * weights[col]).sum()
}

/// Mean negative log-likelihood plus `l2_lambda/2 * ||w||^2` (bias
/// unregularized), evaluated in a numerically stable form.
pub fn logistic_loss(
    matrix: &FeatureMatrix,
    labels: &[Label],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> f64 {
    let n = matrix.n_rows() as f64;
    let mut total = 0.0;
    for (i, label) in labels.iter().enumerate() {
        let z = dot_sparse(matrix.row(i), weights) + bias;
        let y = label.as_01();
        // ln(1 + e^z) - y z, rewritten to avoid overflow for large |z|.
        total += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    }
    let penalty = 0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>();
    total / n + penalty
}

/// Analytic gradient of [`logistic_loss`] with respect to (weights, bias).
pub fn logistic_gradient(
    matrix: &FeatureMatrix,
    labels: &[Label],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (Vec<f64>, f64) {
    let n = matrix.n_rows() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (i, label) in labels.iter().enumerate() {
        let z = dot_sparse(matrix.row(i), weights) + bias;
        let residual = sigmoid(z) - label.as_01();
        grad_b += residual;
        for &(col, v) in matrix.row(i) {
            grad_w[col] += residual * v;
        }
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
    }
    (grad_w, grad_b / n)
}

/// SVM primal objective: `l2_lambda/2 * ||w||^2 + mean max(0, 1 - y(wx+b))`.
pub fn svm_objective(
    matrix: &FeatureMatrix,
    labels: &[Label],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> f64 {
    let n = matrix.n_rows() as f64;
    let hinge: f64 = (0..matrix.n_rows())
        .map(|i| {
            let margin = labels[i].as_pm1() * (dot_sparse(matrix.row(i), weights) + bias);
            (1.0 - margin).max(0.0)
        })
        .sum();
    0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>() + hinge / n
}

fn check_shapes(matrix: &FeatureMatrix, labels: &[Label]) -> Result<(), LinearError> {
    if labels.len() != matrix.n_rows() {
        return Err(LinearError::ShapeMismatch {
            rows: matrix.n_rows(),
            labels: labels.len(),
        });
    }
    if matrix.n_rows() == 0 {
        return Err(LinearError::EmptyTraining);
    }
    Ok(())
}

/// Trains logistic regression by full-batch gradient descent.
///
/// Starts from zero weights (initial score 0.5 everywhere). Each epoch takes
/// one step; if the step would not strictly decrease the loss, the rate is
/// halved and the step retried. Once the rate falls below
/// [`LEARNING_RATE_FLOOR`] with a finite but non-improving loss, training
/// stops early at a stationary point.
pub fn logistic_fit(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &GdConfig,
) -> Result<LinearModel, LinearError> {
    check_shapes(matrix, labels)?;
    if config.epochs == 0 {
        return Err(LinearError::InvalidConfig("epochs must be >= 1"));
    }
    if config.learning_rate <= 0.0 {
        return Err(LinearError::InvalidConfig("learning_rate must be > 0"));
    }
    if config.l2_lambda < 0.0 {
        return Err(LinearError::InvalidConfig("l2_lambda must be >= 0"));
    }

    let mut weights = vec![0.0; matrix.n_cols()];
    let mut bias = 0.0;
    let mut loss = logistic_loss(matrix, labels, &weights, bias, config.l2_lambda);
    let mut history = vec![loss];
    let mut rate = config.learning_rate;
    let mut iterations = 0;

    'epochs: for _ in 0..config.epochs {
        let (grad_w, grad_b) =
            logistic_gradient(matrix, labels, &weights, bias, config.l2_lambda);
        loop {
            let trial_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - rate * g)
                .collect();
            let trial_b = bias - rate * grad_b;
            let trial_loss = logistic_loss(matrix, labels, &trial_w, trial_b, config.l2_lambda);
            if trial_loss.is_finite() && trial_loss < loss {
                weights = trial_w;
                bias = trial_b;
                loss = trial_loss;
                history.push(loss);
                iterations += 1;
                break;
            }
            rate /= 2.0;
            if rate < LEARNING_RATE_FLOOR {
                if !trial_loss.is_finite() {
                    return Err(LinearError::NonFiniteLoss);
                }
                // No strictly improving step exists at the floor: stationary.
                break 'epochs;
            }
        }
    }

    Ok(LinearModel {
        weights,
        bias,
        kind: ModelKind::Logistic,
        training_meta: TrainingMeta {
            iterations,
            final_loss: loss,
            loss_history: history,
        },
    })
}

/// Trains a linear SVM by primal subgradient descent.
///
/// Labels map to -1/+1; epoch `t` (1-based) steps with
/// `learning_rate / (l2_lambda * t)` along the subgradient of the objective.
/// The raw margin `w.x + b` is the score; classification is by sign with
/// ties positive.
pub fn svm_fit(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &GdConfig,
) -> Result<LinearModel, LinearError> {
    check_shapes(matrix, labels)?;
    if config.epochs == 0 {
        return Err(LinearError::InvalidConfig("epochs must be >= 1"));
    }
    if config.l2_lambda == 0.0 {
        return Err(LinearError::LambdaZero);
    }
    if config.l2_lambda < 0.0 || config.learning_rate <= 0.0 {
        return Err(LinearError::InvalidConfig(
            "l2_lambda must be > 0 and learning_rate > 0",
        ));
    }

    let n = matrix.n_rows();
    let mut weights = vec![0.0; matrix.n_cols()];
    let mut bias = 0.0;
    let mut history = vec![svm_objective(matrix, labels, &weights, bias, config.l2_lambda)];

    for t in 1..=config.epochs {
        let mut grad_w: Vec<f64> = weights.iter().map(|w| config.l2_lambda * w).collect();
        let mut grad_b = 0.0;
        for (i, label) in labels.iter().enumerate() {
            let y = label.as_pm1();
            let margin = y * (dot_sparse(matrix.row(i), &weights) + bias);
            if margin < 1.0 {
                for &(col, v) in matrix.row(i) {
                    grad_w[col] -= y * v / n as f64;
                }
                grad_b -= y / n as f64;
            }
        }
        let step = config.learning_rate / (config.l2_lambda * t as f64);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
        // The unregularized bias takes a 1/t step: the weight schedule's
        // 1/(l2_lambda * t) factor would let the bias overshoot by orders of
        // magnitude at small lambda and never recover within the epoch
        // budget.
        bias -= config.learning_rate / t as f64 * grad_b;

        let objective = svm_objective(matrix, labels, &weights, bias, config.l2_lambda);
        if !objective.is_finite() {
            return Err(LinearError::NonFiniteLoss);
        }
        history.push(objective);
    }

    let final_loss = *history.last().expect("history is never empty");
    Ok(LinearModel {
        weights,
        bias,
        kind: ModelKind::Svm,
        training_meta: TrainingMeta {
            iterations: config.epochs,
            final_loss,
            loss_history: history,
        },
    })
}

/// Scores one row: sigmoid of the margin for logistic models, the raw margin
/// for SVMs.
pub fn linear_score(model: &LinearModel, row: &SparseRow) -> Result<f64, LinearError> {
    if let Some(&(col, _)) = row.last() {
        if col >= model.weights.len() {
            return Err(LinearError::DimensionMismatch {
                expected: model.weights.len(),
                got: col,
            });
        }
    }
    let margin = dot_sparse(row, &model.weights) + model.bias;
    Ok(match model.kind {
        ModelKind::Logistic => sigmoid(margin),
        ModelKind::Svm => margin,
    })
}
