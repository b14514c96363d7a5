//! Bag-of-words featurization: tokenizing tweet-like text, building a
//! vocabulary over training documents with sparse-term removal, and turning
//! documents into sparse count vectors over that vocabulary.
//!
//! The vocabulary is always built from training documents only; test
//! documents are mapped onto it with unseen tokens ignored, so the feature
//! space is fixed at training time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use thiserror::Error;

use crate::corpus::LabeledDocument;
use crate::stopwords;

/// Sparse row view: `(column, value)` pairs with strictly increasing columns.
pub type SparseRow = [(usize, f64)];

/// Optional token stemming. The suffix stripper removes one common English
/// inflection suffix per token; it is off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stemming {
    #[default]
    None,
    SuffixStrip,
}

/// Tokenizer and vectorizer settings.
#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub remove_stopwords: bool,
    pub stopword_list: HashSet<String>,
    /// Tokens shorter than this are dropped. Must be >= 1.
    pub min_token_length: usize,
    pub stemming: Stemming,
    /// When set, [`vectorize`] stores 1 for every present term instead of its
    /// occurrence count.
    pub binary_counts: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_urls: true,
            strip_mentions: true,
            remove_stopwords: true,
            stopword_list: stopwords::ENGLISH.iter().map(|w| w.to_string()).collect(),
            min_token_length: 2,
            stemming: Stemming::None,
            binary_counts: false,
        }
    }
}

/// Term index built from training documents.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_frequency: Vec<usize>,
    min_doc_fraction: f64,
    n_train_docs: usize,
}

impl Vocabulary {
    /// Terms in column order (sorted lexicographically).
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> Option<&str> {
        self.terms.get(column).map(|s| s.as_str())
    }

    /// Number of training documents the term at `column` appeared in.
    pub fn doc_frequency(&self, column: usize) -> Option<usize> {
        self.doc_frequency.get(column).copied()
    }

    pub fn min_doc_fraction(&self) -> f64 {
        self.min_doc_fraction
    }

    pub fn n_train_docs(&self) -> usize {
        self.n_train_docs
    }
}

/// Sparse document-term count matrix. Zero counts are never stored and column
/// ids are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    row_ids: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// `(column, count)` pairs of row `i`, columns strictly increasing.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Document ids aligned to rows.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_cols];
        for &(col, count) in &self.rows[i] {
            dense[col] = count;
        }
        dense
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row_dense(i)).collect()
    }

    /// Builds a matrix from dense rows, dropping zeros. Row ids are 0..n.
    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Self {
        let sparse = rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Self {
            n_cols,
            rows: sparse,
            row_ids: (0..rows.len()).collect(),
        }
    }

    /// The submatrix of the given row positions, preserving their order and
    /// document ids.
    pub fn select_rows(&self, positions: &[usize]) -> Self {
        Self {
            n_cols: self.n_cols,
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no term survives the document-frequency filter (min_doc_fraction too high for this corpus)")]
    EmptyVocabulary,
    #[error("cannot build a vocabulary from an empty training set")]
    EmptyTrainingSet,
    #[error("min_doc_fraction must be in [0, 1], got {0}")]
    InvalidMinDocFraction(f64),
    #[error("min_token_length must be >= 1")]
    InvalidMinTokenLength,
    #[error("vectorize requires a non-empty vocabulary")]
    EmptyVocabularyInput,
    #[error("failed to write export: {0}")]
    Io(#[from] std::io::Error),
}

fn looks_like_url(chunk: &str) -> bool {
    if chunk.contains("://") {
        return true;
    }
    let lower = chunk.to_lowercase();
    lower.starts_with("www.")
}

fn looks_like_mention(chunk: &str) -> bool {
    let mut chars = chunk.chars();
    chars.next() == Some('@') && chars.next().is_some()
}

fn strip_suffix_once(token: &str) -> String {
    // Longest-first so "running" loses "ing" rather than just "g".
    for suffix in ["ing", "ed", "ly", "s"] {
        if let Some(stem) = token.strip_suffix(suffix) {
            if stem.len() >= 3 {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

/// Splits text into normalized tokens.
///
/// Whitespace chunks that look like URLs (`scheme://...` or `www....`) or
/// @-mentions are dropped first when the corresponding flags are on; the
/// remaining text is lowercased and split on every non-alphanumeric
/// character. Tokens shorter than `min_token_length` and (optionally)
/// stopwords are dropped. Order and duplicates are preserved.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut kept = String::with_capacity(text.len());
    for chunk in text.split_whitespace() {
        if config.strip_urls && looks_like_url(chunk) {
            continue;
        }
        if config.strip_mentions && looks_like_mention(chunk) {
            continue;
        }
        kept.push_str(chunk);
        kept.push(' ');
    }

    let normalized = if config.lowercase {
        kept.to_lowercase()
    } else {
        kept
    };

    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| match config.stemming {
            Stemming::None => t.to_string(),
            Stemming::SuffixStrip => strip_suffix_once(t),
        })
        .filter(|t| t.chars().count() >= config.min_token_length)
        .filter(|t| !(config.remove_stopwords && config.stopword_list.contains(t.as_str())))
        .collect()
}

/// Builds the term index over training documents.
///
/// A term is retained iff it appears in at least
/// `ceil(min_doc_fraction * n_train)` distinct training documents. Terms are
/// sorted lexicographically; the sort order defines column ids.
pub fn build_vocabulary(
    train_docs: &[LabeledDocument],
    config: &TokenizerConfig,
    min_doc_fraction: f64,
) -> Result<Vocabulary, FeatureError> {
    if train_docs.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    if !(0.0..=1.0).contains(&min_doc_fraction) {
        return Err(FeatureError::InvalidMinDocFraction(min_doc_fraction));
    }
    if config.min_token_length < 1 {
        return Err(FeatureError::InvalidMinTokenLength);
    }

    let n_train = train_docs.len();
    let mut doc_frequency: BTreeMap<String, usize> = BTreeMap::new();
    for doc in train_docs {
        let distinct: HashSet<String> = tokenize(&doc.text, config).into_iter().collect();
        for term in distinct {
            *doc_frequency.entry(term).or_insert(0) += 1;
        }
    }

    let cutoff = (min_doc_fraction * n_train as f64).ceil() as usize;
    let mut terms = Vec::new();
    let mut frequencies = Vec::new();
    for (term, df) in doc_frequency {
        if df >= cutoff {
            terms.push(term);
            frequencies.push(df);
        }
    }
    if terms.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }

    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        index,
        doc_frequency: frequencies,
        min_doc_fraction,
        n_train_docs: n_train,
    })
}

/// Maps documents onto a vocabulary as sparse count rows.
///
/// Row `i` holds the occurrence counts of vocabulary terms in `docs[i]`;
/// out-of-vocabulary tokens are ignored, which is how test documents are
/// projected onto the training feature space. All-zero rows are legal and
/// stored empty.
pub fn vectorize(
    docs: &[LabeledDocument],
    vocab: &Vocabulary,
    config: &TokenizerConfig,
) -> Result<FeatureMatrix, FeatureError> {
    if vocab.is_empty() {
        return Err(FeatureError::EmptyVocabularyInput);
    }
    let mut rows = Vec::with_capacity(docs.len());
    let mut row_ids = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for token in tokenize(&doc.text, config) {
            if let Some(col) = vocab.index_of(&token) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        }
        if config.binary_counts {
            for v in counts.values_mut() {
                *v = 1.0;
            }
        }
        rows.push(counts.into_iter().collect::<Vec<_>>());
        row_ids.push(doc.id);
    }
    Ok(FeatureMatrix {
        n_cols: vocab.len(),
        rows,
        row_ids,
    })
}

/// Writes a matrix as `row,col,count` triplets (debug export).
pub fn write_matrix_csv<W: Write>(matrix: &FeatureMatrix, out: &mut W) -> Result<(), FeatureError> {
    writeln!(out, "row,col,count")?;
    for i in 0..matrix.n_rows() {
        for &(col, count) in matrix.row(i) {
            writeln!(out, "{i},{col},{count}")?;
        }
    }
    Ok(())
}

/// Writes the vocabulary, one term per line in column order.
pub fn write_vocabulary<W: Write>(vocab: &Vocabulary, out: &mut W) -> Result<(), FeatureError> {
    for term in vocab.terms() {
        writeln!(out, "{term}")?;
    }
    Ok(())
}
