//! Wiring between parsed CLI flags and the library: corpus loading, the two
//! clustering orders, report assembly, and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ctp_core::corpus::{load_csv, split_train_test, CorpusError, Label, LabelRule, SplitSpec};
use ctp_core::features::{build_vocabulary, vectorize, FeatureError, TokenizerConfig, Vocabulary};
use ctp_core::hybrid::{
    compare_all_detailed, comparison_csv, hybrid_fit, hybrid_from_clustering, ClassifierSpec,
    CompareOptions, ComparisonOutcome, HybridError,
};
use ctp_core::kmeans::{kmeans_fit, ClusterError, KMeansConfig};
use ctp_core::metrics::{write_roc_csv, EvaluationReport, RocCurve};
use ctp_core::seed;
use ctp_core::tree::{export_dot, forest_fit, TreeError};
use ctp_core::LabeledDocument;

/// CLI failure modes, split by exit code: `Usage` exits 2 and names the flag
/// to fix, `Runtime` exits 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn corpus_error(err: CorpusError) -> CliError {
    match err {
        CorpusError::MissingColumn(name) => CliError::Usage(format!(
            "column {name:?} not found; check --text-col / --label-col"
        )),
        CorpusError::BadLabel { row, value } => CliError::Usage(format!(
            "row {row}: label {value:?} is not mappable; check --label-col or use --label-threshold for numeric labels"
        )),
        other => CliError::Runtime(other.to_string()),
    }
}

fn feature_error(err: FeatureError) -> CliError {
    match err {
        FeatureError::EmptyVocabulary => CliError::Usage(
            "no term survives the document-frequency filter; lower --min-doc-fraction".to_string(),
        ),
        other => CliError::Runtime(other.to_string()),
    }
}

fn hybrid_error(err: HybridError) -> CliError {
    match err {
        HybridError::Cluster(ClusterError::KTooLarge { k, n_rows }) => CliError::Usage(format!(
            "--k {k} exceeds the number of training documents ({n_rows})"
        )),
        HybridError::Tree(TreeError::MtryTooLarge { mtry, n_cols }) => CliError::Usage(format!(
            "--mtry {mtry} exceeds the vocabulary size ({n_cols})"
        )),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Everything `run`/`compare`/`export-tree` share: corpus location, label
/// rule, featurization, and the split.
pub struct DataSettings {
    pub input: PathBuf,
    pub text_col: String,
    pub label_col: String,
    pub label_rule: LabelRule,
    pub split: SplitSpec,
    pub min_doc_fraction: f64,
    pub tokenizer: TokenizerConfig,
}

/// Corpus halves with their feature matrices over the training vocabulary.
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub train_matrix: ctp_core::FeatureMatrix,
    pub test_matrix: ctp_core::FeatureMatrix,
    pub train_labels: Vec<Label>,
    pub test_labels: Vec<Label>,
    pub n_train: usize,
    pub n_test: usize,
}

fn load_documents(settings: &DataSettings) -> Result<Vec<LabeledDocument>, CliError> {
    load_csv(
        &settings.input,
        &settings.text_col,
        &settings.label_col,
        &settings.label_rule,
    )
    .map_err(corpus_error)
}

/// The leak-free order: split first, vocabulary from the training side only.
pub fn prepare_split_then_featurize(settings: &DataSettings) -> Result<PreparedData, CliError> {
    let docs = load_documents(settings)?;
    let (train, test) = split_train_test(&docs, &settings.split).map_err(corpus_error)?;
    let vocab = build_vocabulary(&train, &settings.tokenizer, settings.min_doc_fraction)
        .map_err(feature_error)?;
    let train_matrix = vectorize(&train, &vocab, &settings.tokenizer).map_err(feature_error)?;
    let test_matrix = vectorize(&test, &vocab, &settings.tokenizer).map_err(feature_error)?;
    Ok(PreparedData {
        vocab,
        train_matrix,
        test_matrix,
        train_labels: train.iter().map(|d| d.label).collect(),
        test_labels: test.iter().map(|d| d.label).collect(),
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// The run report written as JSON: evaluation schema plus pipeline context.
#[derive(Serialize)]
pub struct RunReport {
    pub k: usize,
    pub classifier: String,
    pub seed: u64,
    pub cluster_before_split: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub vocabulary_size: usize,
    pub cluster_sizes: Vec<usize>,
    #[serde(flatten)]
    pub evaluation: EvaluationReport,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub roc_paths: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Executes the full pipeline and writes `report.json` plus one ROC CSV per
/// cluster and a pooled one.
pub fn execute_run(
    settings: &DataSettings,
    k: usize,
    spec: &ClassifierSpec,
    master_seed: u64,
    cluster_before_split: bool,
    out_dir: &Path,
) -> Result<RunOutcome, CliError> {
    let (report, evaluation_roc, warnings) = if cluster_before_split {
        run_cluster_before_split(settings, k, spec, master_seed)?
    } else {
        run_split_then_cluster(settings, k, spec, master_seed)?
    };

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let report_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("report serialization failed: {e}")))?;
    json.push('\n');
    write_atomic(&report_path, json.as_bytes())?;

    let mut roc_paths = Vec::new();
    let pooled_path = out_dir.join("roc_pooled.csv");
    write_roc_file(&pooled_path, evaluation_roc.pooled.as_ref())?;
    roc_paths.push(pooled_path);
    for (j, curve) in evaluation_roc.per_cluster.iter().enumerate() {
        let path = out_dir.join(format!("roc_cluster{j}.csv"));
        write_roc_file(&path, curve.as_ref())?;
        roc_paths.push(path);
    }

    Ok(RunOutcome {
        report,
        report_path,
        roc_paths,
        warnings,
    })
}

/// ROC curves pulled out of a report before serialization drops them.
pub struct ReportCurves {
    pub pooled: Option<RocCurve>,
    pub per_cluster: Vec<Option<RocCurve>>,
}

fn collect_curves(evaluation: &EvaluationReport, k: usize) -> ReportCurves {
    let per_cluster = (0..k)
        .map(|j| {
            evaluation
                .per_cluster
                .as_ref()
                .and_then(|m| m.get(&j))
                .and_then(|r| r.as_ref())
                .and_then(|r| r.roc.clone())
        })
        .collect();
    ReportCurves {
        pooled: evaluation.roc.clone(),
        per_cluster,
    }
}

fn run_split_then_cluster(
    settings: &DataSettings,
    k: usize,
    spec: &ClassifierSpec,
    master_seed: u64,
) -> Result<(RunReport, ReportCurves, Vec<String>), CliError> {
    let data = prepare_split_then_featurize(settings)?;
    let model = hybrid_fit(&data.train_matrix, &data.train_labels, k, spec, master_seed)
        .map_err(hybrid_error)?;
    let evaluation = model
        .evaluate(&data.test_matrix, &data.test_labels)
        .map_err(hybrid_error)?;
    let curves = collect_curves(&evaluation, k);
    let report = RunReport {
        k,
        classifier: spec.kind_name().to_string(),
        seed: master_seed,
        cluster_before_split: false,
        n_train: data.n_train,
        n_test: data.n_test,
        vocabulary_size: data.vocab.len(),
        cluster_sizes: model.kmeans().cluster_sizes(),
        evaluation,
    };
    Ok((report, curves, model.warnings().to_vec()))
}

/// The corpus-faithful order: vocabulary and k-means over the whole corpus,
/// split afterwards, classifiers on the training rows of each cluster, test
/// rows routed by their existing assignment.
fn run_cluster_before_split(
    settings: &DataSettings,
    k: usize,
    spec: &ClassifierSpec,
    master_seed: u64,
) -> Result<(RunReport, ReportCurves, Vec<String>), CliError> {
    let docs = load_documents(settings)?;
    let vocab = build_vocabulary(&docs, &settings.tokenizer, settings.min_doc_fraction)
        .map_err(feature_error)?;
    let all_matrix = vectorize(&docs, &vocab, &settings.tokenizer).map_err(feature_error)?;

    let kmeans_config = KMeansConfig {
        k,
        seed: seed::derive_label(master_seed, "kmeans"),
        ..KMeansConfig::default()
    };
    let kmeans = kmeans_fit(&all_matrix, &kmeans_config).map_err(|e| {
        hybrid_error(HybridError::Cluster(e))
    })?;
    let cluster_sizes = kmeans.cluster_sizes();

    let (train, test) = split_train_test(&docs, &settings.split).map_err(corpus_error)?;
    let train_rows: Vec<usize> = train.iter().map(|d| d.id).collect();
    let test_rows: Vec<usize> = test.iter().map(|d| d.id).collect();
    let train_matrix = all_matrix.select_rows(&train_rows);
    let test_matrix = all_matrix.select_rows(&test_rows);
    let train_assign: Vec<usize> = train_rows.iter().map(|&i| kmeans.assignments()[i]).collect();
    let test_assign: Vec<usize> = test_rows.iter().map(|&i| kmeans.assignments()[i]).collect();
    let train_labels: Vec<Label> = train.iter().map(|d| d.label).collect();
    let test_labels: Vec<Label> = test.iter().map(|d| d.label).collect();

    let model = hybrid_from_clustering(
        kmeans,
        &train_matrix,
        &train_labels,
        &train_assign,
        spec,
        master_seed,
    )
    .map_err(hybrid_error)?;
    let evaluation = model
        .evaluate_with_assignments(&test_matrix, &test_labels, &test_assign)
        .map_err(hybrid_error)?;
    let curves = collect_curves(&evaluation, k);
    let report = RunReport {
        k,
        classifier: spec.kind_name().to_string(),
        seed: master_seed,
        cluster_before_split: true,
        n_train: train.len(),
        n_test: test.len(),
        vocabulary_size: vocab.len(),
        cluster_sizes,
        evaluation,
    };
    Ok((report, curves, model.warnings().to_vec()))
}

#[derive(Serialize)]
pub struct CompareReport {
    pub k: usize,
    pub seed: u64,
    pub cluster_sizes: Vec<usize>,
    pub comparison: Vec<ctp_core::ComparisonRow>,
}

pub struct CompareOutcome {
    pub report: CompareReport,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Runs the five-way comparison and writes `comparison.json` and
/// `comparison.csv`.
pub fn execute_compare(
    settings: &DataSettings,
    k: usize,
    options: &CompareOptions,
    master_seed: u64,
    out_dir: &Path,
) -> Result<CompareOutcome, CliError> {
    let data = prepare_split_then_featurize(settings)?;
    let ComparisonOutcome {
        rows,
        cluster_sizes,
        ..
    } = compare_all_detailed(
        &data.train_matrix,
        &data.train_labels,
        &data.test_matrix,
        &data.test_labels,
        k,
        master_seed,
        options,
    )
    .map_err(hybrid_error)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let report = CompareReport {
        k,
        seed: master_seed,
        cluster_sizes,
        comparison: rows,
    };
    let json_path = out_dir.join("comparison.json");
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("comparison serialization failed: {e}")))?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;

    let csv_path = out_dir.join("comparison.csv");
    write_atomic(&csv_path, comparison_csv(&report.comparison).as_bytes())?;

    Ok(CompareOutcome {
        report,
        json_path,
        csv_path,
    })
}

/// Fits a forest on the training split and exports one tree as DOT.
pub fn execute_export_tree(
    settings: &DataSettings,
    forest_config: &ctp_core::ForestConfig,
    tree_config: &ctp_core::TreeConfig,
    master_seed: u64,
    tree_index: usize,
    dot_out: &Path,
) -> Result<PathBuf, CliError> {
    let data = prepare_split_then_featurize(settings)?;
    let forest = forest_fit(
        &data.train_matrix,
        &data.train_labels,
        forest_config,
        tree_config,
        seed::derive(master_seed, 0),
    )
    .map_err(|e| hybrid_error(HybridError::Tree(e)))?;

    if tree_index >= forest.n_trees() {
        return Err(CliError::Usage(format!(
            "--tree-index {tree_index} is out of range for a forest of {} trees",
            forest.n_trees()
        )));
    }
    let dot = export_dot(&forest.trees()[tree_index], &data.vocab)
        .map_err(|e| hybrid_error(HybridError::Tree(e)))?;
    if let Some(parent) = dot_out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Runtime(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    write_atomic(dot_out, dot.as_bytes())?;
    Ok(dot_out.to_path_buf())
}

fn write_roc_file(path: &Path, curve: Option<&RocCurve>) -> Result<(), CliError> {
    let mut buffer = Vec::new();
    match curve {
        Some(curve) => {
            write_roc_csv(curve, &mut buffer)
                .map_err(|e| CliError::Runtime(format!("ROC serialization failed: {e}")))?;
        }
        // Clusters with no test rows or a single class get a header-only
        // file, keeping the one-file-per-cluster contract.
        None => buffer.extend_from_slice(b"fpr,tpr\n"),
    }
    write_atomic(path, &buffer)
}

/// Writes via a temp file in the target directory plus rename, so an
/// interrupted run never leaves a partial report.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut temp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| CliError::Runtime(format!("cannot create temp file for {}: {e}", path.display())))?;
    temp.write_all(contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    temp.persist(path)
        .map_err(|e| CliError::Runtime(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// One-line human summary of a run report.
pub fn summarize_run(outcome: &RunOutcome) -> String {
    let eval = &outcome.report.evaluation;
    let mut line = format!(
        "accuracy {:.4}  baseline {:.4}",
        eval.accuracy, eval.baseline_accuracy
    );
    match eval.auc {
        Some(auc) => {
            let _ = write!(line, "  auc {auc:.4}");
        }
        None => line.push_str("  auc n/a (one class)"),
    }
    let _ = write!(
        line,
        "  clusters {:?}  report {}",
        outcome.report.cluster_sizes,
        outcome.report_path.display()
    );
    line
}
