//! Labeled-corpus loading and train/test splitting.
//!
//! Corpora are plain CSV files (RFC 4180 quoting, UTF-8, mandatory header)
//! with one text column and one label column. Splits are seeded permutations
//! so that a given `(corpus, SplitSpec)` pair always produces the same
//! partition.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }

    /// 0/1 encoding used by the logistic loss.
    pub fn as_01(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }

    /// -1/+1 encoding used by the hinge loss.
    pub fn as_pm1(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }
}

/// One text with its sentiment label; ids are contiguous from 0 in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: usize,
    pub text: String,
    pub label: Label,
}

/// How raw label-column values map onto [`Label`].
#[derive(Debug, Clone)]
pub enum LabelRule {
    /// Literal strings, matched case-insensitively after trimming.
    Strings {
        positive: BTreeSet<String>,
        negative: BTreeSet<String>,
    },
    /// Numeric scores: `Negative` iff `score <= threshold`.
    Threshold(f64),
}

impl LabelRule {
    /// The default string mapping: positive/pos and negative/neg.
    pub fn default_strings() -> Self {
        let set = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        LabelRule::Strings {
            positive: set(&["positive", "pos"]),
            negative: set(&["negative", "neg"]),
        }
    }

    fn apply(&self, raw: &str) -> Option<Label> {
        match self {
            LabelRule::Strings { positive, negative } => {
                let v = raw.trim().to_lowercase();
                if positive.contains(&v) {
                    Some(Label::Positive)
                } else if negative.contains(&v) {
                    Some(Label::Negative)
                } else {
                    None
                }
            }
            LabelRule::Threshold(threshold) => {
                let score: f64 = raw.trim().parse().ok()?;
                if score <= *threshold {
                    Some(Label::Negative)
                } else {
                    Some(Label::Positive)
                }
            }
        }
    }
}

impl Default for LabelRule {
    fn default() -> Self {
        Self::default_strings()
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of documents that go to the training side, in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),
    #[error("row {row}: label value {value:?} is not mappable under the label rule")]
    BadLabel { row: usize, value: String },
    #[error("corpus has no data rows")]
    EmptyCorpus,
    #[error("rows with empty text: {0:?}")]
    EmptyText(Vec<usize>),
    #[error("malformed CSV: {0}")]
    MalformedCsv(#[from] csv::Error),
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("train fraction must be in (0, 1), got {0}")]
    InvalidTrainFraction(f64),
    #[error("too few documents to split: n={n}, train side would hold {train} of them")]
    TooFewDocuments { n: usize, train: usize },
}

/// Loads a labeled corpus from a CSV file.
///
/// One [`LabeledDocument`] per data row, in file order, ids `0..n-1`. Rows
/// with empty text are rejected (all offending row numbers are reported);
/// silent drops would skew the split accounting downstream.
pub fn load_csv(
    path: &Path,
    text_column: &str,
    label_column: &str,
    rule: &LabelRule,
) -> Result<Vec<LabeledDocument>, CorpusError> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, text_column, label_column, rule)
}

/// [`load_csv`] over any reader; the file variant is a thin wrapper.
pub fn load_csv_reader<R: Read>(
    reader: R,
    text_column: &str,
    label_column: &str,
    rule: &LabelRule,
) -> Result<Vec<LabeledDocument>, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let text_idx = column(text_column)?;
    let label_idx = column(label_column)?;

    let mut docs = Vec::new();
    let mut empty_rows = Vec::new();
    // Data rows are numbered from 1 (the header is row 0) in error messages.
    for (row_number, record) in csv_reader.records().enumerate() {
        let record = record?;
        let row = row_number + 1;
        let text = record.get(text_idx).unwrap_or("");
        let raw_label = record.get(label_idx).unwrap_or("");
        if text.trim().is_empty() {
            empty_rows.push(row);
            continue;
        }
        let label = rule.apply(raw_label).ok_or_else(|| CorpusError::BadLabel {
            row,
            value: raw_label.to_string(),
        })?;
        docs.push(LabeledDocument {
            id: docs.len(),
            text: text.to_string(),
            label,
        });
    }

    if !empty_rows.is_empty() {
        return Err(CorpusError::EmptyText(empty_rows));
    }
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(docs)
}

/// Splits a corpus into train and test sides.
///
/// A seeded uniform permutation of the ids is drawn; the first
/// `round(n * train_fraction)` ids (rounding half-up) form the train side.
/// Each side keeps its documents in original corpus order. Both sides must
/// end up non-empty.
pub fn split_train_test(
    docs: &[LabeledDocument],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledDocument>, Vec<LabeledDocument>), CorpusError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CorpusError::InvalidTrainFraction(spec.train_fraction));
    }
    let n = docs.len();
    let train_size = (n as f64 * spec.train_fraction).round() as usize;
    if n < 2 || train_size == 0 || train_size >= n {
        return Err(CorpusError::TooFewDocuments { n, train: train_size });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let mut train_ids: Vec<usize> = order[..train_size].to_vec();
    let mut test_ids: Vec<usize> = order[train_size..].to_vec();
    train_ids.sort_unstable();
    test_ids.sort_unstable();

    let pick = |ids: &[usize]| ids.iter().map(|&i| docs[i].clone()).collect();
    Ok((pick(&train_ids), pick(&test_ids)))
}
