//! The cluster-then-predict meta-model: k-means over the training rows, one
//! classifier per cluster, nearest-centroid routing of test rows, and pooled
//! plus per-cluster evaluation.
//!
//! Seeds follow a fixed derivation contract: k-means uses
//! `derive_label(master_seed, "kmeans")` and the classifier of cluster `j`
//! uses `derive(master_seed, j)`. Standalone baselines in the comparison use
//! `derive(seed, 0)`, which makes a k=1 hybrid prediction-identical to the
//! corresponding standalone model.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FeatureMatrix, SparseRow};
use crate::kmeans::{kmeans_fit, ClusterError, KMeansConfig, KMeansModel};
use crate::linear::{linear_score, logistic_fit, svm_fit, GdConfig, LinearError, LinearModel};
use crate::metrics::{
    accuracy, baseline_accuracy, confusion, evaluate_scores, roc_curve, EvalError,
    EvaluationReport,
};
use crate::seed;
use crate::tree::{cart_fit, forest_fit, tree_score, ForestConfig, ForestModel, TreeConfig, TreeError, TreeNode};

/// Which classifier runs inside each cluster (and standalone).
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Cart(TreeConfig),
    Forest(ForestConfig, TreeConfig),
    Logistic(GdConfig),
    Svm(GdConfig),
}

impl ClassifierSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ClassifierSpec::Cart(_) => "cart",
            ClassifierSpec::Forest(..) => "forest",
            ClassifierSpec::Logistic(_) => "logistic",
            ClassifierSpec::Svm(_) => "svm",
        }
    }

    /// Decision threshold for this score space: SVM margins classify by sign,
    /// everything else at 0.5 (ties positive either way).
    pub fn decision_threshold(&self) -> f64 {
        match self {
            ClassifierSpec::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    fn constant_score(&self, label: Label) -> f64 {
        match self {
            // Margin-valued space: encode the class in the sign.
            ClassifierSpec::Svm(_) => label.as_pm1(),
            _ => label.as_01(),
        }
    }
}

/// A fitted per-cluster predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterClassifier {
    /// Degenerate cluster (single training label, or no training rows in the
    /// cluster-before-split flow): a fixed score.
    Constant { score: f64 },
    Cart(TreeNode),
    Forest(ForestModel),
    Linear(LinearModel),
}

impl ClusterClassifier {
    fn score_row(&self, row: &SparseRow) -> Result<f64, HybridError> {
        match self {
            ClusterClassifier::Constant { score } => Ok(*score),
            ClusterClassifier::Cart(tree) => Ok(tree_score(tree, row)),
            ClusterClassifier::Forest(forest) => Ok(forest.score_row(row)?),
            ClusterClassifier::Linear(model) => Ok(linear_score(model, row)?),
        }
    }
}

/// The fitted hybrid model.
#[derive(Debug, Clone)]
pub struct ClusterThenPredictModel {
    kmeans: KMeansModel,
    per_cluster: Vec<ClusterClassifier>,
    spec: ClassifierSpec,
    master_seed: u64,
    n_cols: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("labels length {labels} does not match row count {rows}")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("dimension mismatch: model was trained on {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("assignments length {got} does not match row count {rows}")]
    AssignmentMismatch { rows: usize, got: usize },
}

/// Fits one classifier per cluster over the given training assignment.
///
/// Cluster `j` trains only on the rows assigned to it, with seed
/// `derive(master_seed, j)`. Single-label clusters become constant
/// classifiers; clusters with no training rows (possible only when the
/// assignment comes from outside, e.g. clustering before the split) fall
/// back to a constant on the overall majority label, with a warning.
pub fn fit_cluster_classifiers(
    train: &FeatureMatrix,
    labels: &[Label],
    assignments: &[usize],
    k: usize,
    spec: &ClassifierSpec,
    master_seed: u64,
) -> Result<(Vec<ClusterClassifier>, Vec<String>), HybridError> {
    if labels.len() != train.n_rows() {
        return Err(HybridError::LengthMismatch {
            rows: train.n_rows(),
            labels: labels.len(),
        });
    }
    if assignments.len() != train.n_rows() {
        return Err(HybridError::AssignmentMismatch {
            rows: train.n_rows(),
            got: assignments.len(),
        });
    }

    let positives = labels.iter().filter(|l| l.is_positive()).count();
    let majority = if positives * 2 >= labels.len() {
        Label::Positive
    } else {
        Label::Negative
    };

    let mut classifiers = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for j in 0..k {
        let positions: Vec<usize> = (0..train.n_rows())
            .filter(|&i| assignments[i] == j)
            .collect();
        if positions.is_empty() {
            warnings.push(format!(
                "cluster {j} has no training rows; substituting a constant {majority:?} classifier"
            ));
            classifiers.push(ClusterClassifier::Constant {
                score: spec.constant_score(majority),
            });
            continue;
        }

        let sub_labels: Vec<Label> = positions.iter().map(|&i| labels[i]).collect();
        let first = sub_labels[0];
        if sub_labels.iter().all(|&l| l == first) {
            classifiers.push(ClusterClassifier::Constant {
                score: spec.constant_score(first),
            });
            continue;
        }

        let sub_matrix = train.select_rows(&positions);
        let cluster_seed = seed::derive(master_seed, j as u64);
        let classifier = match spec {
            ClassifierSpec::Cart(tree_config) => {
                ClusterClassifier::Cart(cart_fit(&sub_matrix, &sub_labels, tree_config)?)
            }
            ClassifierSpec::Forest(forest_config, tree_config) => ClusterClassifier::Forest(
                forest_fit(&sub_matrix, &sub_labels, forest_config, tree_config, cluster_seed)?,
            ),
            ClassifierSpec::Logistic(gd) => {
                ClusterClassifier::Linear(logistic_fit(&sub_matrix, &sub_labels, gd)?)
            }
            ClassifierSpec::Svm(gd) => {
                ClusterClassifier::Linear(svm_fit(&sub_matrix, &sub_labels, gd)?)
            }
        };
        classifiers.push(classifier);
    }
    Ok((classifiers, warnings))
}

/// Fits the full hybrid model: k-means on the training rows only, then one
/// classifier per cluster.
pub fn hybrid_fit(
    train: &FeatureMatrix,
    labels: &[Label],
    k: usize,
    spec: &ClassifierSpec,
    master_seed: u64,
) -> Result<ClusterThenPredictModel, HybridError> {
    let kmeans_config = KMeansConfig {
        k,
        seed: seed::derive_label(master_seed, "kmeans"),
        ..KMeansConfig::default()
    };
    let kmeans = kmeans_fit(train, &kmeans_config)?;
    let (per_cluster, warnings) =
        fit_cluster_classifiers(train, labels, kmeans.assignments(), k, spec, master_seed)?;
    Ok(ClusterThenPredictModel {
        kmeans,
        per_cluster,
        spec: spec.clone(),
        master_seed,
        n_cols: train.n_cols(),
        warnings,
    })
}

/// Builds a hybrid model around an externally fitted clustering (the
/// cluster-before-split flow).
pub fn hybrid_from_clustering(
    kmeans: KMeansModel,
    train: &FeatureMatrix,
    labels: &[Label],
    train_assignments: &[usize],
    spec: &ClassifierSpec,
    master_seed: u64,
) -> Result<ClusterThenPredictModel, HybridError> {
    let k = kmeans.k();
    let (per_cluster, warnings) =
        fit_cluster_classifiers(train, labels, train_assignments, k, spec, master_seed)?;
    Ok(ClusterThenPredictModel {
        kmeans,
        per_cluster,
        spec: spec.clone(),
        master_seed,
        n_cols: train.n_cols(),
        warnings,
    })
}

impl ClusterThenPredictModel {
    pub fn k(&self) -> usize {
        self.per_cluster.len()
    }

    pub fn kmeans(&self) -> &KMeansModel {
        &self.kmeans
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn per_cluster(&self) -> &[ClusterClassifier] {
        &self.per_cluster
    }

    /// Degenerate-cluster substitutions recorded during fitting.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn check_matrix(&self, matrix: &FeatureMatrix) -> Result<(), HybridError> {
        if matrix.n_cols() != self.n_cols {
            return Err(HybridError::DimensionMismatch {
                expected: self.n_cols,
                got: matrix.n_cols(),
            });
        }
        Ok(())
    }

    /// Routes every row to its nearest training centroid and scores it with
    /// that cluster's classifier. Returns `(cluster id, score)` per row.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<(usize, f64)>, HybridError> {
        self.check_matrix(matrix)?;
        (0..matrix.n_rows())
            .map(|i| {
                let row = matrix.row(i);
                let cluster = self.kmeans.assign_nearest(row)?;
                let score = self.per_cluster[cluster].score_row(row)?;
                Ok((cluster, score))
            })
            .collect()
    }

    /// Like [`predict`](Self::predict) but with precomputed cluster ids
    /// (cluster-before-split routing).
    pub fn predict_with_assignments(
        &self,
        matrix: &FeatureMatrix,
        assignments: &[usize],
    ) -> Result<Vec<(usize, f64)>, HybridError> {
        self.check_matrix(matrix)?;
        if assignments.len() != matrix.n_rows() {
            return Err(HybridError::AssignmentMismatch {
                rows: matrix.n_rows(),
                got: assignments.len(),
            });
        }
        (0..matrix.n_rows())
            .map(|i| {
                let cluster = assignments[i];
                let score = self.per_cluster[cluster].score_row(matrix.row(i))?;
                Ok((cluster, score))
            })
            .collect()
    }

    /// Evaluates routed predictions: a pooled report plus one sub-report per
    /// cluster (null for clusters that received no test rows).
    pub fn evaluate(
        &self,
        matrix: &FeatureMatrix,
        labels: &[Label],
    ) -> Result<EvaluationReport, HybridError> {
        let routed = self.predict(matrix)?;
        self.report_from_routed(&routed, labels)
    }

    /// [`evaluate`](Self::evaluate) over precomputed cluster ids.
    pub fn evaluate_with_assignments(
        &self,
        matrix: &FeatureMatrix,
        labels: &[Label],
        assignments: &[usize],
    ) -> Result<EvaluationReport, HybridError> {
        let routed = self.predict_with_assignments(matrix, assignments)?;
        self.report_from_routed(&routed, labels)
    }

    fn report_from_routed(
        &self,
        routed: &[(usize, f64)],
        labels: &[Label],
    ) -> Result<EvaluationReport, HybridError> {
        if labels.len() != routed.len() {
            return Err(HybridError::LengthMismatch {
                rows: routed.len(),
                labels: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(HybridError::Eval(EvalError::EmptyInput));
        }
        let threshold = self.spec.decision_threshold();

        let mut per_cluster: BTreeMap<usize, Option<EvaluationReport>> = BTreeMap::new();
        for j in 0..self.k() {
            let cluster_labels: Vec<Label> = routed
                .iter()
                .zip(labels)
                .filter(|((c, _), _)| *c == j)
                .map(|(_, &l)| l)
                .collect();
            let cluster_scores: Vec<f64> = routed
                .iter()
                .filter(|(c, _)| *c == j)
                .map(|&(_, s)| s)
                .collect();
            if cluster_labels.is_empty() {
                per_cluster.insert(j, None);
            } else {
                per_cluster.insert(
                    j,
                    Some(evaluate_scores(&cluster_labels, &cluster_scores, threshold)?),
                );
            }
        }

        let scores: Vec<f64> = routed.iter().map(|&(_, s)| s).collect();
        let cm = confusion(labels, &scores, threshold)?;
        let pooled_roc = match roc_curve(labels, &self.pooled_roc_scores(routed)) {
            Ok(curve) => Some(curve),
            Err(EvalError::OneClassOnly) => None,
            Err(other) => return Err(other.into()),
        };
        Ok(EvaluationReport {
            accuracy: accuracy(&cm)?,
            baseline_accuracy: baseline_accuracy(labels)?,
            auc: pooled_roc.as_ref().map(|c| c.auc),
            confusion: cm,
            roc: pooled_roc,
            per_cluster: Some(per_cluster),
        })
    }

    /// Scores used for the pooled ROC. Probability-like scores pool as-is;
    /// SVM margins are min-max rescaled within each cluster first, since raw
    /// margins from different per-cluster models are not on a shared scale.
    fn pooled_roc_scores(&self, routed: &[(usize, f64)]) -> Vec<f64> {
        if !matches!(self.spec, ClassifierSpec::Svm(_)) {
            return routed.iter().map(|&(_, s)| s).collect();
        }
        let mut bounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for &(cluster, score) in routed {
            let entry = bounds.entry(cluster).or_insert((score, score));
            entry.0 = entry.0.min(score);
            entry.1 = entry.1.max(score);
        }
        routed
            .iter()
            .map(|&(cluster, score)| {
                let (low, high) = bounds[&cluster];
                if high > low {
                    (score - low) / (high - low)
                } else {
                    0.5
                }
            })
            .collect()
    }
}

/// One row of the five-technique comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub technique: String,
    pub accuracy: f64,
    pub auc: f64,
    pub interpretability: Interpretability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Interpretability {
    High,
    Low,
}

/// Classifier settings used by [`compare_all`].
#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    pub forest: ForestConfig,
    pub tree: TreeConfig,
    pub logistic: Option<GdConfig>,
    pub svm: Option<GdConfig>,
}

impl CompareOptions {
    fn logistic(&self) -> GdConfig {
        self.logistic.unwrap_or_else(GdConfig::logistic_default)
    }

    fn svm(&self) -> GdConfig {
        self.svm.unwrap_or_else(GdConfig::svm_default)
    }
}

/// Everything [`compare_all_detailed`] learns along the way.
#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub rows: Vec<ComparisonRow>,
    /// Training-cluster sizes of the hybrid model.
    pub cluster_sizes: Vec<usize>,
    pub hybrid_report: EvaluationReport,
}

/// Runs the five-way comparison: the hybrid (forest per cluster) against
/// standalone SVM, CART, random forest, and logistic regression, in that
/// order. Standalone seeded models train with `derive(seed, 0)`.
pub fn compare_all(
    train: &FeatureMatrix,
    train_labels: &[Label],
    test: &FeatureMatrix,
    test_labels: &[Label],
    k: usize,
    seed_value: u64,
    options: &CompareOptions,
) -> Result<Vec<ComparisonRow>, HybridError> {
    compare_all_detailed(train, train_labels, test, test_labels, k, seed_value, options)
        .map(|outcome| outcome.rows)
}

/// [`compare_all`] plus the hybrid's evaluation report and cluster sizes.
pub fn compare_all_detailed(
    train: &FeatureMatrix,
    train_labels: &[Label],
    test: &FeatureMatrix,
    test_labels: &[Label],
    k: usize,
    seed_value: u64,
    options: &CompareOptions,
) -> Result<ComparisonOutcome, HybridError> {
    let standalone_seed = seed::derive(seed_value, 0);
    let mut rows = Vec::with_capacity(5);

    let hybrid_spec = ClassifierSpec::Forest(options.forest, options.tree);
    let hybrid = hybrid_fit(train, train_labels, k, &hybrid_spec, seed_value)?;
    let cluster_sizes = hybrid.kmeans().cluster_sizes();
    let hybrid_report = hybrid.evaluate(test, test_labels)?;
    rows.push(ComparisonRow {
        technique: "Proposed hybrid approach".to_string(),
        accuracy: hybrid_report.accuracy,
        auc: hybrid_report.auc.ok_or(EvalError::OneClassOnly)?,
        interpretability: Interpretability::High,
    });

    let svm = svm_fit(train, train_labels, &options.svm())?;
    rows.push(score_based_row("SVM", &svm.scores(test)?, test_labels, 0.0, Interpretability::Low)?);

    let cart = cart_fit(train, train_labels, &options.tree)?;
    let cart_scores: Vec<f64> = (0..test.n_rows())
        .map(|i| tree_score(&cart, test.row(i)))
        .collect();
    rows.push(score_based_row("CART", &cart_scores, test_labels, 0.5, Interpretability::High)?);

    let forest = forest_fit(train, train_labels, &options.forest, &options.tree, standalone_seed)?;
    rows.push(score_based_row(
        "Random forest",
        &forest.scores(test)?,
        test_labels,
        0.5,
        Interpretability::High,
    )?);

    let logistic = logistic_fit(train, train_labels, &options.logistic())?;
    rows.push(score_based_row(
        "Logistic Regression",
        &logistic.scores(test)?,
        test_labels,
        0.5,
        Interpretability::Low,
    )?);

    Ok(ComparisonOutcome {
        rows,
        cluster_sizes,
        hybrid_report,
    })
}

fn score_based_row(
    technique: &str,
    scores: &[f64],
    labels: &[Label],
    threshold: f64,
    interpretability: Interpretability,
) -> Result<ComparisonRow, HybridError> {
    let cm = confusion(labels, scores, threshold)?;
    let curve = roc_curve(labels, scores)?;
    Ok(ComparisonRow {
        technique: technique.to_string(),
        accuracy: accuracy(&cm)?,
        auc: curve.auc,
        interpretability,
    })
}

/// Renders comparison rows as the `technique,accuracy,auc,interpretability`
/// CSV.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("technique,accuracy,auc,interpretability\n");
    for row in rows {
        let interp = match row.interpretability {
            Interpretability::High => "High",
            Interpretability::Low => "Low",
        };
        out.push_str(&format!(
            "{},{:.6},{:.7},{}\n",
            row.technique, row.accuracy, row.auc, interp
        ));
    }
    out
}
