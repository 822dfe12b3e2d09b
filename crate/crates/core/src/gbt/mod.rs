//! Multiclass gradient-boosted regression trees.
//!
//! Each boosting round fits one tree per class to the first and second
//! derivatives of softmax cross-entropy. Leaf weights are `-G / (H + lambda)`
//! shrunk by `eta`, and a split is kept only when its gain, penalized by
//! `gamma`, is positive. Initial scores are the log class priors.

pub mod grid;
pub mod loss;
pub mod tree;

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseMatrix;
pub use grid::{grid_search, grid_search_with, CvRow, CvTable, Param, ParamGrid};
pub use tree::{split_gain, RegressionTree, TreeNode};
use tree::{FeatureColumns, GrowParams};

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training labels contain a single class ({0:?}); at least two are required")]
    SingleClass(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training loss became non-finite at round {0}")]
    NonFiniteLoss(usize),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model file: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub eta: f64,
    pub num_round: usize,
    pub gamma: f64,
    pub subsample: f64,
    pub lambda: f64,
    pub min_child_hessian: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            eta: 0.3,
            num_round: 100,
            gamma: 0.0,
            subsample: 1.0,
            lambda: 1.0,
            min_child_hessian: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: String| Err(GbtError::InvalidConfig(m));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta {} outside (0, 1]", self.eta));
        }
        if self.num_round == 0 {
            return bad("num_round must be at least 1".into());
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma {} must be >= 0", self.gamma));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample {} outside (0, 1]", self.subsample));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if !(self.min_child_hessian >= 0.0 && self.min_child_hessian.is_finite()) {
            return bad(format!(
                "min_child_hessian {} must be finite and >= 0",
                self.min_child_hessian
            ));
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_hessian: self.min_child_hessian,
            eta: self.eta,
        }
    }
}

/// A trained model: `rounds[r][k]` is the tree for class `k` in round `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    classes: Vec<String>,
    base_scores: Vec<f64>,
    n_features: usize,
    config: TrainConfig,
    rounds: Vec<Vec<RegressionTree>>,
    training_loss: Vec<f64>,
}

const MODEL_FORMAT: &str = "metaug-gbt";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    classes: Vec<String>,
    base_scores: Vec<f64>,
    n_features: usize,
    config: TrainConfig,
    #[serde(default)]
    training_loss: Vec<f64>,
    rounds: Vec<Vec<RegressionTree>>,
}

impl BoostedEnsemble {
    /// Assembles an ensemble from parts, checking shapes.
    pub fn from_parts(
        classes: Vec<String>,
        base_scores: Vec<f64>,
        n_features: usize,
        config: TrainConfig,
        rounds: Vec<Vec<RegressionTree>>,
    ) -> Result<Self, GbtError> {
        if classes.len() < 2 {
            return Err(GbtError::Model("need at least two classes".into()));
        }
        if base_scores.len() != classes.len() || base_scores.iter().any(|b| !b.is_finite()) {
            return Err(GbtError::Model(
                "base scores must be finite, one per class".into(),
            ));
        }
        if rounds.len() > config.num_round {
            return Err(GbtError::Model(format!(
                "{} rounds exceed num_round {}",
                rounds.len(),
                config.num_round
            )));
        }
        for (r, trees) in rounds.iter().enumerate() {
            if trees.len() != classes.len() {
                return Err(GbtError::Model(format!(
                    "round {r} has {} trees for {} classes",
                    trees.len(),
                    classes.len()
                )));
            }
            for t in trees {
                RegressionTree::from_nodes(t.nodes().to_vec())
                    .map_err(|e| GbtError::Model(format!("round {r}: {e}")))?;
                if t.max_feature().is_some_and(|f| f >= n_features) {
                    return Err(GbtError::Model(format!("round {r}: feature out of range")));
                }
                if t.depth() > config.max_depth {
                    return Err(GbtError::Model(format!(
                        "round {r}: tree deeper than max_depth"
                    )));
                }
            }
        }
        Ok(Self {
            classes,
            base_scores,
            n_features,
            config,
            rounds,
            training_loss: Vec::new(),
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn rounds(&self) -> &[Vec<RegressionTree>] {
        &self.rounds
    }

    /// Mean training cross-entropy after each completed round.
    pub fn training_loss(&self) -> &[f64] {
        &self.training_loss
    }

    fn check_width(&self, matrix: &SparseMatrix) -> Result<(), GbtError> {
        if matrix.n_cols() != self.n_features {
            return Err(GbtError::DimensionMismatch {
                expected: self.n_features,
                got: matrix.n_cols(),
            });
        }
        Ok(())
    }

    fn row_scores(&self, cols: &[usize], vals: &[f64]) -> Vec<f64> {
        let mut scores = self.base_scores.clone();
        for trees in &self.rounds {
            for (s, t) in scores.iter_mut().zip(trees) {
                *s += t.predict_row(cols, vals);
            }
        }
        scores
    }

    /// Raw per-class scores (logits) for every row.
    pub fn predict_scores(&self, matrix: &SparseMatrix) -> Result<Vec<Vec<f64>>, GbtError> {
        self.check_width(matrix)?;
        Ok((0..matrix.n_rows())
            .into_par_iter()
            .map(|i| {
                let (c, v) = matrix.row(i);
                self.row_scores(c, v)
            })
            .collect())
    }

    /// Softmax class probabilities, ordered like [`Self::classes`].
    pub fn predict_proba(&self, matrix: &SparseMatrix) -> Result<Vec<Vec<f64>>, GbtError> {
        Ok(self
            .predict_scores(matrix)?
            .iter()
            .map(|s| loss::softmax(s))
            .collect())
    }

    /// Most probable class per row; ties go to the earlier class.
    pub fn predict_labels(&self, matrix: &SparseMatrix) -> Result<Vec<&str>, GbtError> {
        Ok(self
            .predict_scores(matrix)?
            .iter()
            .map(|s| {
                let mut best = 0;
                for (k, v) in s.iter().enumerate() {
                    if *v > s[best] {
                        best = k;
                    }
                }
                self.classes[best].as_str()
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            classes: self.classes.clone(),
            base_scores: self.base_scores.clone(),
            n_features: self.n_features,
            config: self.config,
            training_loss: self.training_loss.clone(),
            rounds: self.rounds.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GbtError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| GbtError::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(GbtError::Model(format!(
                "unexpected format {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(GbtError::Model(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let mut model = Self::from_parts(
            file.classes,
            file.base_scores,
            file.n_features,
            file.config,
            file.rounds,
        )?;
        model.training_loss = file.training_loss;
        Ok(model)
    }
}

fn mean_cross_entropy(scores: &[f64], n_classes: usize, targets: &[usize]) -> f64 {
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &y)| loss::cross_entropy(&scores[i * n_classes..(i + 1) * n_classes], y))
        .sum();
    total / targets.len() as f64
}

/// Trains on `matrix` rows with one label per row.
pub fn train<S: AsRef<str>>(
    matrix: &SparseMatrix,
    labels: &[S],
    config: &TrainConfig,
) -> Result<BoostedEnsemble, GbtError> {
    config.validate()?;
    let n = matrix.n_rows();
    if labels.len() != n {
        return Err(GbtError::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let classes: Vec<String> = labels
        .iter()
        .map(|l| l.as_ref().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    match classes.len() {
        0 => return Err(GbtError::InvalidConfig("no training rows".into())),
        1 => return Err(GbtError::SingleClass(classes[0].clone())),
        _ => {}
    }
    let k = classes.len();
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| {
            classes
                .binary_search_by(|c| c.as_str().cmp(l.as_ref()))
                .expect("class set")
        })
        .collect();
    let mut counts = vec![0usize; k];
    for &y in &targets {
        counts[y] += 1;
    }
    let base_scores: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();

    let columns = FeatureColumns::new(matrix);
    let params = config.grow_params();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_sampled = ((n as f64 * config.subsample).round() as usize).clamp(1, n);

    let mut scores: Vec<f64> = (0..n).flat_map(|_| base_scores.iter().copied()).collect();
    let mut rounds = Vec::with_capacity(config.num_round);
    let mut history = Vec::with_capacity(config.num_round);
    let mut grad = vec![vec![0.0; n]; k];
    let mut hess = vec![vec![0.0; n]; k];

    for round in 0..config.num_round {
        let rows: Vec<usize> = if n_sampled < n {
            let mut r = index::sample(&mut rng, n, n_sampled).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        for i in 0..n {
            let (g, h) = loss::gradients(&scores[i * k..(i + 1) * k], targets[i]);
            for c in 0..k {
                grad[c][i] = g[c];
                hess[c][i] = h[c];
            }
        }
        let trees: Vec<RegressionTree> = (0..k)
            .into_par_iter()
            .map(|c| tree::grow_tree(matrix, &columns, &grad[c], &hess[c], &rows, params))
            .collect();
        for i in 0..n {
            let (cols, vals) = matrix.row(i);
            for (c, t) in trees.iter().enumerate() {
                scores[i * k + c] += t.predict_row(cols, vals);
            }
        }
        let loss = mean_cross_entropy(&scores, k, &targets);
        if !loss.is_finite() {
            return Err(GbtError::NonFiniteLoss(round + 1));
        }
        history.push(loss);
        rounds.push(trees);
    }

    Ok(BoostedEnsemble {
        classes,
        base_scores,
        n_features: matrix.n_cols(),
        config: *config,
        rounds,
        training_loss: history,
    })
}
