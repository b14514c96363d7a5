//! Cluster-then-predict sentiment classification.
//!
//! The pipeline loads a labeled short-text corpus from CSV, splits it 70/30,
//! builds bag-of-words count features over the training vocabulary, clusters
//! the training documents with k-means, trains one classifier per cluster,
//! routes test documents to their nearest centroid's classifier, and
//! evaluates with confusion matrices, accuracy, and ROC/AUC - overall and
//! per cluster. Standalone CART, random forest, logistic regression, and
//! linear SVM baselines are included for comparison.
//!
//! Everything is seeded and deterministic: the same corpus and settings
//! always reproduce the same models and reports.

pub mod corpus;
pub mod features;
pub mod hybrid;
pub mod kmeans;
pub mod linear;
pub mod metrics;
pub mod seed;
pub mod stopwords;
pub mod synth;
pub mod tree;

pub use corpus::{Label, LabeledDocument, LabelRule, SplitSpec};
pub use features::{FeatureMatrix, TokenizerConfig, Vocabulary};
pub use hybrid::{ClassifierSpec, ClusterThenPredictModel, ComparisonRow};
pub use kmeans::{KMeansConfig, KMeansModel};
pub use linear::{GdConfig, LinearModel};
pub use metrics::{ConfusionMatrix, EvaluationReport, RocCurve};
pub use tree::{ForestConfig, ForestModel, TreeConfig, TreeNode};
