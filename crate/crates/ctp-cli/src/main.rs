//! `ctp` - cluster-then-predict sentiment classification from labeled CSV
//! corpora.

mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctp_core::corpus::{LabelRule, SplitSpec};
use ctp_core::features::TokenizerConfig;
use ctp_core::hybrid::{ClassifierSpec, CompareOptions};
use ctp_core::linear::GdConfig;
use ctp_core::tree::{ForestConfig, TreeConfig};

use pipeline::{CliError, DataSettings};

#[derive(Parser)]
#[command(
    name = "ctp",
    version,
    about = "Cluster-then-predict sentiment classification",
    long_about = "Loads a labeled text corpus from CSV, splits it into train/test, builds \
bag-of-words features, clusters the training documents with k-means, trains one classifier \
per cluster, and evaluates with confusion matrix, accuracy, ROC and AUC."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hybrid pipeline and write report.json plus ROC CSVs
    Run(RunArgs),
    /// Compare the hybrid against standalone SVM, CART, random forest, and
    /// logistic regression
    Compare(CompareArgs),
    /// Fit a random forest and export one of its trees as Graphviz DOT
    ExportTree(ExportTreeArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input corpus CSV (header row required)
    #[arg(long)]
    input: PathBuf,

    /// Name of the text column
    #[arg(long, default_value = "text")]
    text_col: String,

    /// Name of the label column
    #[arg(long, default_value = "label")]
    label_col: String,

    /// Treat the label column as numeric: Negative iff value <= threshold.
    /// Without this flag labels must be positive/negative strings.
    #[arg(long)]
    label_threshold: Option<f64>,

    /// Fraction of documents used for training
    #[arg(long, default_value_t = 0.7, value_parser = parse_open_unit)]
    train_frac: f64,

    /// Master seed for the split, clustering, and seeded classifiers
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Drop vocabulary terms appearing in fewer than this fraction of
    /// training documents
    #[arg(long, default_value_t = 0.005, value_parser = parse_closed_unit)]
    min_doc_fraction: f64,
}

impl DataArgs {
    fn settings(&self) -> DataSettings {
        let label_rule = match self.label_threshold {
            Some(threshold) => LabelRule::Threshold(threshold),
            None => LabelRule::default_strings(),
        };
        DataSettings {
            input: self.input.clone(),
            text_col: self.text_col.clone(),
            label_col: self.label_col.clone(),
            label_rule,
            split: SplitSpec::new(self.train_frac, self.seed),
            min_doc_fraction: self.min_doc_fraction,
            tokenizer: TokenizerConfig::default(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    Forest,
    Cart,
    Logistic,
    Svm,
}

#[derive(Args)]
struct ModelArgs {
    /// Number of k-means clusters
    #[arg(long, default_value_t = 2, value_parser = parse_positive_usize)]
    k: usize,

    /// Per-cluster classifier
    #[arg(long, value_enum, default_value_t = ClassifierKind::Forest)]
    classifier: ClassifierKind,

    /// Trees per forest
    #[arg(long, default_value_t = 200, value_parser = parse_positive_usize)]
    n_trees: usize,

    /// Candidate features per split (default: floor(sqrt(vocabulary size)))
    #[arg(long)]
    mtry: Option<usize>,

    /// Disable bootstrap sampling for forest trees
    #[arg(long)]
    no_bootstrap: bool,

    /// Maximum tree depth (default: unlimited)
    #[arg(long)]
    max_depth: Option<usize>,

    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,

    #[arg(long, default_value_t = 1, value_parser = parse_positive_usize)]
    min_samples_leaf: usize,

    #[arg(long, default_value_t = 0.0)]
    min_impurity_decrease: f64,

    /// Gradient-descent step size (default: 0.1 logistic, 1.0 SVM)
    #[arg(long)]
    learning_rate: Option<f64>,

    /// L2 regularization strength for the linear models
    #[arg(long, default_value_t = 1e-3)]
    l2_lambda: f64,

    /// Gradient-descent epochs
    #[arg(long, default_value_t = 200, value_parser = parse_positive_usize)]
    epochs: usize,
}

impl ModelArgs {
    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            min_impurity_decrease: self.min_impurity_decrease,
        }
    }

    fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            mtry: self.mtry,
            bootstrap: !self.no_bootstrap,
        }
    }

    fn gd_config(&self, default_rate: f64) -> Result<GdConfig, CliError> {
        if self.l2_lambda < 0.0 {
            return Err(CliError::Usage("--l2-lambda must be >= 0".to_string()));
        }
        let learning_rate = self.learning_rate.unwrap_or(default_rate);
        if learning_rate <= 0.0 {
            return Err(CliError::Usage("--learning-rate must be > 0".to_string()));
        }
        Ok(GdConfig {
            learning_rate,
            l2_lambda: self.l2_lambda,
            epochs: self.epochs,
        })
    }

    fn classifier_spec(&self) -> Result<ClassifierSpec, CliError> {
        match self.classifier {
            ClassifierKind::Forest => {
                Ok(ClassifierSpec::Forest(self.forest_config(), self.tree_config()))
            }
            ClassifierKind::Cart => Ok(ClassifierSpec::Cart(self.tree_config())),
            ClassifierKind::Logistic => Ok(ClassifierSpec::Logistic(self.gd_config(0.1)?)),
            ClassifierKind::Svm => {
                let config = self.gd_config(1.0)?;
                if config.l2_lambda == 0.0 {
                    return Err(CliError::Usage(
                        "--l2-lambda must be > 0 for the SVM step schedule".to_string(),
                    ));
                }
                Ok(ClassifierSpec::Svm(config))
            }
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Directory for report.json and the ROC CSVs
    #[arg(long, default_value = "ctp-out")]
    out_dir: PathBuf,

    /// Mimic the corpus-level order: cluster the whole corpus before the
    /// train/test split (lets test text influence the vocabulary and
    /// centroids)
    #[arg(long)]
    cluster_before_split: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Directory for comparison.json and comparison.csv
    #[arg(long, default_value = "ctp-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExportTreeArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Which tree of the forest to export
    #[arg(long, default_value_t = 0)]
    tree_index: usize,

    /// Output DOT file
    #[arg(long, default_value = "tree.dot")]
    dot_out: PathBuf,
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in the open interval (0, 1)"))
    }
}

fn parse_closed_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn parse_positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be >= 1".to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let settings = args.data.settings();
            let spec = args.model.classifier_spec()?;
            let outcome = pipeline::execute_run(
                &settings,
                args.model.k,
                &spec,
                args.data.seed,
                args.cluster_before_split,
                &args.out_dir,
            )?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            println!("{}", pipeline::summarize_run(&outcome));
            println!(
                "wrote {} ROC files to {}",
                outcome.roc_paths.len(),
                args.out_dir.display()
            );
            Ok(())
        }
        Command::Compare(args) => {
            let settings = args.data.settings();
            let options = CompareOptions {
                forest: args.model.forest_config(),
                tree: args.model.tree_config(),
                logistic: Some(args.model.gd_config(0.1)?),
                svm: Some(args.model.gd_config(1.0)?),
            };
            if options.svm.unwrap().l2_lambda == 0.0 {
                return Err(CliError::Usage(
                    "--l2-lambda must be > 0 for the SVM step schedule".to_string(),
                ));
            }
            let outcome = pipeline::execute_compare(
                &settings,
                args.model.k,
                &options,
                args.data.seed,
                &args.out_dir,
            )?;
            for row in &outcome.report.comparison {
                println!(
                    "{:<26} accuracy {:.4}  auc {:.4}",
                    row.technique, row.accuracy, row.auc
                );
            }
            println!(
                "wrote {} and {}",
                outcome.json_path.display(),
                outcome.csv_path.display()
            );
            Ok(())
        }
        Command::ExportTree(args) => {
            let settings = args.data.settings();
            let path = pipeline::execute_export_tree(
                &settings,
                &args.model.forest_config(),
                &args.model.tree_config(),
                args.data.seed,
                args.tree_index,
                &args.dot_out,
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
