//! CART decision trees and bagged random forests over sparse count rows.
//!
//! Trees grow by greedy binary splitting on Gini impurity; thresholds are
//! midpoints between adjacent observed feature values and ties are broken by
//! (lowest feature id, lowest threshold), which makes training fully
//! deterministic. Forests bag bootstrap samples and restrict each node's
//! split search to a random feature subset drawn from the tree's own seeded
//! stream; the vote fraction of the trees is the forest score.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FeatureMatrix, SparseRow};
use crate::features::Vocabulary;
use crate::seed;

/// A trained tree: internal nodes test `feature < threshold` (left) versus
/// `>= threshold` (right); leaves carry the training positive fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
        sample_count: usize,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    /// Maximum tree depth; `None` means unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(n_cols))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            mtry: None,
            bootstrap: true,
        }
    }
}

/// A bagged ensemble of CART trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeNode>,
    n_cols: usize,
    mtry: usize,
    bootstrap: bool,
    seed: u64,
}

impl ForestModel {
    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    /// Majority-vote score: the fraction of trees whose leaf calls the row
    /// positive (leaf positive fraction >= 0.5). Always a multiple of
    /// `1/n_trees` in [0, 1].
    pub fn score_row(&self, row: &SparseRow) -> Result<f64, TreeError> {
        check_row_dim(row, self.n_cols)?;
        let votes = self
            .trees
            .iter()
            .filter(|tree| tree_score(tree, row) >= 0.5)
            .count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    /// Scores every row of a matrix built over the training columns.
    pub fn scores(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, TreeError> {
        if matrix.n_cols() != self.n_cols {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_cols,
                got: matrix.n_cols(),
            });
        }
        (0..matrix.n_rows()).map(|i| self.score_row(matrix.row(i))).collect()
    }

    /// JSON export of the ensemble as an array of serialized trees.
    pub fn export_json(&self) -> String {
        serde_json::to_string(&self.trees).expect("tree serialization cannot fail")
    }
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("labels length {labels} does not match row count {rows}")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("cannot fit a tree on zero rows")]
    EmptyTraining,
    #[error("gini is undefined for zero total count")]
    EmptyCounts,
    #[error("mtry={mtry} exceeds the number of features ({n_cols})")]
    MtryTooLarge { mtry: usize, n_cols: usize },
    #[error("invalid tree config: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected columns < {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tree references feature {feature} but the vocabulary has {vocab_len} terms")]
    VocabMismatch { feature: usize, vocab_len: usize },
}

fn check_row_dim(row: &SparseRow, n_cols: usize) -> Result<(), TreeError> {
    if let Some(&(col, _)) = row.last() {
        if col >= n_cols {
            return Err(TreeError::DimensionMismatch {
                expected: n_cols,
                got: col,
            });
        }
    }
    Ok(())
}

/// Gini impurity of a two-class count pair: `1 - p_neg^2 - p_pos^2`.
pub fn gini(negative: usize, positive: usize) -> Result<f64, TreeError> {
    let total = negative + positive;
    if total == 0 {
        return Err(TreeError::EmptyCounts);
    }
    let p_neg = negative as f64 / total as f64;
    let p_pos = positive as f64 / total as f64;
    Ok(1.0 - p_neg * p_neg - p_pos * p_pos)
}

/// Value of `col` in a sparse row (absent columns read as zero).
fn sparse_value(row: &SparseRow, col: usize) -> f64 {
    match row.binary_search_by_key(&col, |&(c, _)| c) {
        Ok(i) => row[i].1,
        Err(_) => 0.0,
    }
}

/// Routes a row down a tree and returns the leaf's positive fraction.
pub fn tree_score(root: &TreeNode, row: &SparseRow) -> f64 {
    let mut node = root;
    loop {
        match node {
            TreeNode::Leaf {
                positive_fraction, ..
            } => return *positive_fraction,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if sparse_value(row, *feature) < *threshold {
                    left
                } else {
                    right
                };
            }
        }
    }
}

enum FeatureScope {
    All,
    Subset { mtry: usize, rng: Box<ChaCha8Rng> },
}

struct TreeBuilder<'a> {
    matrix: &'a FeatureMatrix,
    positives: &'a [bool],
    config: &'a TreeConfig,
    scope: FeatureScope,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl TreeBuilder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let n_cols = self.matrix.n_cols();
        match &mut self.scope {
            FeatureScope::All => (0..n_cols).collect(),
            FeatureScope::Subset { mtry, rng } => {
                let mut picked = rand::seq::index::sample(rng, n_cols, *mtry).into_vec();
                // Sort so tie-breaking by lowest feature id is independent of
                // the sampling order.
                picked.sort_unstable();
                picked
            }
        }
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let positive = rows.iter().filter(|&&r| self.positives[r]).count();
        let negative = rows.len() - positive;
        let leaf = TreeNode::Leaf {
            positive_fraction: positive as f64 / rows.len() as f64,
            sample_count: rows.len(),
        };

        if positive == 0 || negative == 0 {
            return leaf;
        }
        if rows.len() < self.config.min_samples_split {
            return leaf;
        }
        if let Some(max_depth) = self.config.max_depth {
            if depth >= max_depth {
                return leaf;
            }
        }

        let candidates = self.candidate_features();
        let best = match self.best_split(rows, &candidates, negative, positive) {
            Some(best) if best.decrease >= self.config.min_impurity_decrease => best,
            _ => return leaf,
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| sparse_value(self.matrix.row(r), best.feature) < best.threshold);
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        TreeNode::Internal {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Exhaustive search over candidate features and midpoint thresholds for
    /// the split with the largest weighted Gini decrease. Candidates arrive
    /// sorted and thresholds are scanned in increasing order, so keeping only
    /// strict improvements implements the tie rule.
    fn best_split(
        &self,
        rows: &[usize],
        candidates: &[usize],
        negative: usize,
        positive: usize,
    ) -> Option<BestSplit> {
        let total = rows.len();
        let parent_gini = gini(negative, positive).expect("node is non-empty");
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<BestSplit> = None;

        for &feature in candidates {
            let mut values: Vec<(f64, bool)> = rows
                .iter()
                .map(|&r| (sparse_value(self.matrix.row(r), feature), self.positives[r]))
                .collect();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_pos = 0usize;
            let mut left_neg = 0usize;
            for i in 0..total - 1 {
                if values[i].1 {
                    left_pos += 1;
                } else {
                    left_neg += 1;
                }
                if values[i].0 == values[i + 1].0 {
                    continue;
                }
                let left_total = i + 1;
                let right_total = total - left_total;
                if left_total < min_leaf || right_total < min_leaf {
                    continue;
                }
                let right_pos = positive - left_pos;
                let right_neg = negative - left_neg;
                let left_gini = gini(left_neg, left_pos).expect("non-empty side");
                let right_gini = gini(right_neg, right_pos).expect("non-empty side");
                let weighted = (left_total as f64 * left_gini
                    + right_total as f64 * right_gini)
                    / total as f64;
                let decrease = parent_gini - weighted;
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    best = Some(BestSplit {
                        feature,
                        threshold: (values[i].0 + values[i + 1].0) / 2.0,
                        decrease,
                    });
                }
            }
        }
        best
    }
}

fn check_shapes(matrix: &FeatureMatrix, labels: &[Label]) -> Result<(), TreeError> {
    if labels.len() != matrix.n_rows() {
        return Err(TreeError::ShapeMismatch {
            rows: matrix.n_rows(),
            labels: labels.len(),
        });
    }
    if matrix.n_rows() == 0 {
        return Err(TreeError::EmptyTraining);
    }
    Ok(())
}

fn check_tree_config(config: &TreeConfig) -> Result<(), TreeError> {
    if config.min_samples_leaf < 1 {
        return Err(TreeError::InvalidConfig("min_samples_leaf must be >= 1"));
    }
    if config.min_samples_split < 2 {
        return Err(TreeError::InvalidConfig("min_samples_split must be >= 2"));
    }
    if config.min_impurity_decrease < 0.0 {
        return Err(TreeError::InvalidConfig("min_impurity_decrease must be >= 0"));
    }
    Ok(())
}

/// Fits a single CART tree on all features.
///
/// Training is deterministic: the split search is exhaustive and ties are
/// broken by (lowest feature id, lowest threshold), so no seed is involved.
pub fn cart_fit(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &TreeConfig,
) -> Result<TreeNode, TreeError> {
    check_shapes(matrix, labels)?;
    check_tree_config(config)?;
    let positives: Vec<bool> = labels.iter().map(|l| l.is_positive()).collect();
    let mut builder = TreeBuilder {
        matrix,
        positives: &positives,
        config,
        scope: FeatureScope::All,
    };
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    Ok(builder.build(&rows, 0))
}

/// Fits a bagged random forest.
///
/// Tree `t` draws its own RNG stream from `derive(seed, t)`; with bootstrap
/// on it trains on n rows drawn with replacement, and each node restricts the
/// split search to an mtry-subset sampled without replacement from that
/// stream. `n_trees=1, bootstrap=off, mtry=n_cols` reproduces [`cart_fit`]
/// exactly.
pub fn forest_fit(
    matrix: &FeatureMatrix,
    labels: &[Label],
    forest_config: &ForestConfig,
    tree_config: &TreeConfig,
    seed_value: u64,
) -> Result<ForestModel, TreeError> {
    check_shapes(matrix, labels)?;
    check_tree_config(tree_config)?;
    if forest_config.n_trees == 0 {
        return Err(TreeError::InvalidConfig("n_trees must be >= 1"));
    }
    let n_cols = matrix.n_cols();
    let mtry = forest_config
        .mtry
        .unwrap_or_else(|| (n_cols as f64).sqrt().floor().max(1.0) as usize);
    if mtry > n_cols {
        return Err(TreeError::MtryTooLarge { mtry, n_cols });
    }
    if mtry == 0 {
        return Err(TreeError::InvalidConfig("mtry must be >= 1"));
    }

    let n = matrix.n_rows();
    let positives: Vec<bool> = labels.iter().map(|l| l.is_positive()).collect();
    let mut trees = Vec::with_capacity(forest_config.n_trees);
    for t in 0..forest_config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, t as u64));
        let rows: Vec<usize> = if forest_config.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder {
            matrix,
            positives: &positives,
            config: tree_config,
            scope: FeatureScope::Subset {
                mtry,
                rng: Box::new(rng),
            },
        };
        trees.push(builder.build(&rows, 0));
    }
    Ok(ForestModel {
        trees,
        n_cols,
        mtry,
        bootstrap: forest_config.bootstrap,
        seed: seed_value,
    })
}

fn escape_dot(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a tree as a Graphviz digraph with vocabulary terms as labels.
///
/// Node ids are assigned in preorder, so the output is deterministic for a
/// given tree. Internal nodes read `term < threshold`; edges are labeled
/// `yes`/`no`; leaves show the majority class, positive fraction, and sample
/// count.
pub fn export_dot(tree: &TreeNode, vocab: &Vocabulary) -> Result<String, TreeError> {
    fn walk(
        node: &TreeNode,
        vocab: &Vocabulary,
        next_id: &mut usize,
        out: &mut String,
    ) -> Result<usize, TreeError> {
        let id = *next_id;
        *next_id += 1;
        match node {
            TreeNode::Leaf {
                positive_fraction,
                sample_count,
            } => {
                let class = if *positive_fraction >= 0.5 {
                    "Positive"
                } else {
                    "Negative"
                };
                out.push_str(&format!(
                    "  n{id} [label=\"{class} p={positive_fraction:.3} n={sample_count}\" shape=ellipse];\n"
                ));
            }
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let term = vocab
                    .term(*feature)
                    .ok_or(TreeError::VocabMismatch {
                        feature: *feature,
                        vocab_len: vocab.len(),
                    })?;
                out.push_str(&format!(
                    "  n{id} [label=\"{} < {threshold}\" shape=box];\n",
                    escape_dot(term)
                ));
                let left_id = walk(left, vocab, next_id, out)?;
                let right_id = walk(right, vocab, next_id, out)?;
                out.push_str(&format!("  n{id} -> n{left_id} [label=\"yes\"];\n"));
                out.push_str(&format!("  n{id} -> n{right_id} [label=\"no\"];\n"));
            }
        }
        Ok(id)
    }

    let mut body = String::new();
    let mut next_id = 0;
    walk(tree, vocab, &mut next_id, &mut body)?;
    Ok(format!("digraph cart_tree {{\n{body}}}\n"))
}
