//! Cross-module pipeline tests: corpus to features to models to reports.

mod common;

use ctp_core::corpus::{split_train_test, Label, SplitSpec};
use ctp_core::features::{build_vocabulary, vectorize, TokenizerConfig};
use ctp_core::hybrid::{hybrid_fit, hybrid_from_clustering, ClassifierSpec};
use ctp_core::kmeans::{kmeans_fit, KMeansConfig};
use ctp_core::metrics::write_roc_csv;
use ctp_core::synth::{generate_corpus, SynthConfig, DOMINANT_NEGATIVE};
use ctp_core::tree::{cart_fit, export_dot, forest_fit, ForestConfig, TreeConfig, TreeNode};
use ctp_core::GdConfig;

fn small_corpus() -> Vec<ctp_core::LabeledDocument> {
    generate_corpus(
        &SynthConfig {
            n_docs: 220,
            ..SynthConfig::default()
        },
        11,
    )
}

#[test]
fn end_to_end_hybrid_run_produces_a_complete_report() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();
    let (train, test) = split_train_test(&docs, &SplitSpec::new(0.7, 11)).unwrap();
    assert_eq!(train.len(), 154);
    assert_eq!(test.len(), 66);

    let vocab = build_vocabulary(&train, &config, 0.005).unwrap();
    let train_m = vectorize(&train, &vocab, &config).unwrap();
    let test_m = vectorize(&test, &vocab, &config).unwrap();
    assert_eq!(train_m.n_cols(), vocab.len());
    assert_eq!(test_m.n_cols(), vocab.len());

    let train_y: Vec<Label> = train.iter().map(|d| d.label).collect();
    let test_y: Vec<Label> = test.iter().map(|d| d.label).collect();
    let spec = ClassifierSpec::Forest(
        ForestConfig {
            n_trees: 25,
            ..ForestConfig::default()
        },
        TreeConfig::default(),
    );
    let model = hybrid_fit(&train_m, &train_y, 2, &spec, 42).unwrap();
    let report = model.evaluate(&test_m, &test_y).unwrap();

    assert!(report.accuracy > report.baseline_accuracy);
    let auc = report.auc.expect("both classes are present");
    assert!(auc > 0.5);

    let per_cluster = report.per_cluster.as_ref().unwrap();
    assert_eq!(per_cluster.len(), 2);
    let pooled_total: usize = per_cluster
        .values()
        .flatten()
        .map(|r| r.confusion.total())
        .sum();
    assert_eq!(pooled_total, test.len());

    // Report JSON carries the documented schema.
    let json = serde_json::to_value(&report).unwrap();
    for key in ["accuracy", "baseline_accuracy", "auc", "confusion", "per_cluster"] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
    assert!(json["per_cluster"]["0"]["confusion"]["tp"].is_number());

    // Each defined ROC curve serializes to a parseable CSV.
    let mut out = Vec::new();
    write_roc_csv(report.roc.as_ref().unwrap(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("fpr,tpr\n"));
    assert!(text.lines().count() > 2);
}

#[test]
fn refitting_on_identical_inputs_reproduces_identical_predictions() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();
    let (train, test) = split_train_test(&docs, &SplitSpec::new(0.7, 3)).unwrap();
    let vocab = build_vocabulary(&train, &config, 0.005).unwrap();
    let train_m = vectorize(&train, &vocab, &config).unwrap();
    let test_m = vectorize(&test, &vocab, &config).unwrap();
    let train_y: Vec<Label> = train.iter().map(|d| d.label).collect();

    let spec = ClassifierSpec::Forest(
        ForestConfig {
            n_trees: 10,
            ..ForestConfig::default()
        },
        TreeConfig::default(),
    );
    // Second fit happens with the test matrix alive and already vectorized;
    // only the training inputs may influence the model.
    let first = hybrid_fit(&train_m, &train_y, 2, &spec, 7).unwrap();
    let second = hybrid_fit(&train_m, &train_y, 2, &spec, 7).unwrap();
    assert_eq!(first.predict(&test_m).unwrap(), second.predict(&test_m).unwrap());
    assert_eq!(first.kmeans().assignments(), second.kmeans().assignments());
}

#[test]
fn fitted_tree_dot_export_parses_and_names_the_dominant_keyword() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();
    let vocab = build_vocabulary(&docs, &config, 0.005).unwrap();
    let matrix = vectorize(&docs, &vocab, &config).unwrap();
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let tree = cart_fit(&matrix, &labels, &TreeConfig::default()).unwrap();
    assert!(!tree.is_leaf());

    let dot = export_dot(&tree, &vocab).unwrap();
    let graph = common::parse_dot(&dot).expect("exported DOT must parse");
    assert_eq!(graph.name, "cart_tree");
    assert_eq!(graph.nodes.len(), tree.node_count());
    assert_eq!(graph.edges.len(), tree.node_count() - 1);

    // The dominant negative keyword drives the root split on this corpus.
    match &tree {
        TreeNode::Internal { feature, .. } => {
            assert_eq!(vocab.term(*feature), Some(DOMINANT_NEGATIVE));
        }
        TreeNode::Leaf { .. } => unreachable!(),
    }
    assert!(dot.contains(&format!("{DOMINANT_NEGATIVE} < ")));
}

#[test]
fn forest_json_export_is_an_array_of_trees() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();
    let vocab = build_vocabulary(&docs, &config, 0.01).unwrap();
    let matrix = vectorize(&docs, &vocab, &config).unwrap();
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let forest = forest_fit(
        &matrix,
        &labels,
        &ForestConfig {
            n_trees: 4,
            ..ForestConfig::default()
        },
        &TreeConfig::default(),
        1,
    )
    .unwrap();

    let exported = forest.export_json();
    let trees: Vec<TreeNode> = serde_json::from_str(&exported).unwrap();
    assert_eq!(trees.len(), 4);
    assert_eq!(&trees[..], forest.trees());
}

#[test]
fn cluster_before_split_flow_routes_by_global_assignments() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();

    // Vocabulary and clustering over the full corpus, then the split.
    let vocab = build_vocabulary(&docs, &config, 0.005).unwrap();
    let all_m = vectorize(&docs, &vocab, &config).unwrap();
    let kmeans = kmeans_fit(&all_m, &KMeansConfig::new(2, 5)).unwrap();

    let (train, test) = split_train_test(&docs, &SplitSpec::new(0.7, 5)).unwrap();
    let train_rows: Vec<usize> = train.iter().map(|d| d.id).collect();
    let test_rows: Vec<usize> = test.iter().map(|d| d.id).collect();
    let train_m = all_m.select_rows(&train_rows);
    let test_m = all_m.select_rows(&test_rows);
    let train_assign: Vec<usize> = train_rows.iter().map(|&i| kmeans.assignments()[i]).collect();
    let test_assign: Vec<usize> = test_rows.iter().map(|&i| kmeans.assignments()[i]).collect();
    let train_y: Vec<Label> = train.iter().map(|d| d.label).collect();
    let test_y: Vec<Label> = test.iter().map(|d| d.label).collect();

    let model = hybrid_from_clustering(
        kmeans,
        &train_m,
        &train_y,
        &train_assign,
        &ClassifierSpec::Logistic(GdConfig::logistic_default()),
        9,
    )
    .unwrap();
    let report = model
        .evaluate_with_assignments(&test_m, &test_y, &test_assign)
        .unwrap();
    assert!(report.accuracy > report.baseline_accuracy);
    let routed = model
        .predict_with_assignments(&test_m, &test_assign)
        .unwrap();
    for (given, (cluster, _)) in test_assign.iter().zip(&routed) {
        assert_eq!(given, cluster);
    }
}

#[test]
fn out_of_vocabulary_test_documents_stay_in_the_training_space() {
    let docs = small_corpus();
    let config = TokenizerConfig::default();
    let (train, _) = split_train_test(&docs, &SplitSpec::new(0.7, 2)).unwrap();
    let vocab = build_vocabulary(&train, &config, 0.005).unwrap();

    let unseen = vec![ctp_core::LabeledDocument {
        id: 0,
        text: "zzyzx quux flibbertigibbet".to_string(),
        label: Label::Positive,
    }];
    let matrix = vectorize(&unseen, &vocab, &config).unwrap();
    assert_eq!(matrix.n_cols(), vocab.len());
    assert!(matrix.row(0).is_empty());
}
