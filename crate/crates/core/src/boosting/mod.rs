//! Histogram gradient boosting (Newton boosting over quantile-binned
//! features) for multiclass classification and least-squares regression.

mod binning;
mod tree;

pub use binning::{bin_features, cut_points, BinMap, BinnedMatrix, BINNING_SUBSAMPLE};
pub use tree::{Node, Tree};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::ScoreScale;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use tree::{GrowParams, TreeGrower};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    None,
    /// `w_c = n / (K * n_c)`.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub max_leaf_nodes: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    pub leaf_regularization: f64,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            learning_rate: 0.1,
            max_iterations: 100,
            max_leaf_nodes: 30,
            max_depth: 3,
            min_samples_leaf: 20,
            n_bins: 256,
            leaf_regularization: 1.0,
            class_weighting: ClassWeighting::None,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("gbm: {msg}")));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.max_leaf_nodes < 2 {
            return bad("max_leaf_nodes must be at least 2");
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad("n_bins must be in [2, 256]");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(self.leaf_regularization >= 0.0) {
            return bad("leaf_regularization must be non-negative");
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_leaf_nodes: self.max_leaf_nodes,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            lambda: self.leaf_regularization,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classifier,
    Regressor,
}

/// Fitted ensemble. For a classifier each iteration holds one tree per
/// class; a regressor holds one tree per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub format_version: u32,
    pub task: Task,
    pub n_features: usize,
    pub bin_map: BinMap,
    /// Class labels in ascending order (classifier only).
    pub classes: Vec<i32>,
    /// Log class priors (classifier) or target mean (regressor).
    pub base: Vec<f64>,
    pub iterations: Vec<Vec<Tree>>,
    pub config: GbmConfig,
    /// Training loss before boosting and after each iteration: weighted
    /// mean cross-entropy, or mean squared error.
    pub training_loss: Vec<f64>,
}

fn check_input(x: &Matrix, n_targets: usize, config: &GbmConfig) -> Result<()> {
    config.validate()?;
    if x.rows == 0 {
        return Err(Error::EmptyInput("no training rows"));
    }
    if n_targets != x.rows {
        return Err(Error::DimensionMismatch { expected: x.rows, actual: n_targets });
    }
    if x.rows < config.min_samples_leaf {
        return Err(Error::InvalidConfig(format!(
            "gbm: {} rows is fewer than min_samples_leaf {}",
            x.rows, config.min_samples_leaf
        )));
    }
    Ok(())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for e in v.iter_mut() {
        *e = libm::exp(*e - max);
        sum += *e;
    }
    for e in v.iter_mut() {
        *e /= sum;
    }
}

/// Softmax cross-entropy boosting with one tree per class per iteration.
pub fn fit_classifier(x: &Matrix, y: &[i32], config: &GbmConfig) -> Result<GbmModel> {
    check_input(x, y.len(), config)?;
    let classes: Vec<i32> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let k = classes.len();
    let n = x.rows;
    let label: Vec<usize> = y.iter().map(|v| classes.binary_search(v).expect("label is a class")).collect();

    let mut class_counts = vec![0usize; k];
    for &c in &label {
        class_counts[c] += 1;
    }
    let class_weight: Vec<f64> = match config.class_weighting {
        ClassWeighting::None => vec![1.0; k],
        ClassWeighting::Balanced => class_counts.iter().map(|&c| n as f64 / (k as f64 * c as f64)).collect(),
    };
    let weight: Vec<f64> = label.iter().map(|&c| class_weight[c]).collect();
    let total_weight: f64 = weight.iter().sum();

    let mut class_weight_sum = vec![0.0; k];
    for (&c, &w) in label.iter().zip(&weight) {
        class_weight_sum[c] += w;
    }
    let base: Vec<f64> = class_weight_sum.iter().map(|s| libm::log(s / total_weight)).collect();

    let (bin_map, binned) = bin_features(x, config.n_bins, config.seed)?;
    let rows: Vec<u32> = (0..n as u32).collect();

    // raw[i * k + c]
    let mut raw: Vec<f64> = (0..n).flat_map(|_| base.iter().copied()).collect();
    let mut prob = raw.clone();
    let loss = |prob: &[f64]| -> f64 {
        let mut l = 0.0;
        for i in 0..n {
            l -= weight[i] * libm::log(prob[i * k + label[i]].max(f64::MIN_POSITIVE));
        }
        l / total_weight
    };
    let refresh = |raw: &[f64], prob: &mut [f64]| {
        prob.copy_from_slice(raw);
        for row in prob.chunks_mut(k) {
            softmax_in_place(row);
        }
    };
    refresh(&raw, &mut prob);
    let mut training_loss = vec![loss(&prob)];

    let mut iterations = Vec::new();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut update = vec![0.0; n];
    for _ in 0..config.max_iterations {
        let mut trees = Vec::with_capacity(k);
        let mut updates = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = prob[i * k + c];
                let target = if label[i] == c { 1.0 } else { 0.0 };
                grad[i] = weight[i] * (p - target);
                hess[i] = weight[i] * (p * (1.0 - p)).max(1e-16);
            }
            let grower = TreeGrower::new(&binned, &bin_map, &grad, &hess, config.grow_params());
            let tree = grower.grow(&rows, &mut update);
            trees.push(tree);
            updates.push(update.clone());
        }
        if trees.iter().all(Tree::is_stump) {
            break;
        }
        for (c, u) in updates.iter().enumerate() {
            for i in 0..n {
                raw[i * k + c] += u[i];
            }
        }
        refresh(&raw, &mut prob);
        training_loss.push(loss(&prob));
        iterations.push(trees);
    }

    Ok(GbmModel {
        format_version: MODEL_FORMAT_VERSION,
        task: Task::Classifier,
        n_features: x.cols,
        bin_map,
        classes,
        base,
        iterations,
        config: *config,
        training_loss,
    })
}

/// Least-squares boosting (`g = prediction - y`, `h = 1`).
pub fn fit_regressor(x: &Matrix, y: &[f64], config: &GbmConfig) -> Result<GbmModel> {
    check_input(x, y.len(), config)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, column: x.cols });
    }
    let n = x.rows;
    let mean = y.iter().sum::<f64>() / n as f64;
    let (bin_map, binned) = bin_features(x, config.n_bins, config.seed)?;
    let rows: Vec<u32> = (0..n as u32).collect();

    let mut pred = vec![mean; n];
    let mse = |pred: &[f64]| pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64;
    let mut training_loss = vec![mse(&pred)];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let mut update = vec![0.0; n];
    let mut iterations = Vec::new();
    for _ in 0..config.max_iterations {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let tree = TreeGrower::new(&binned, &bin_map, &grad, &hess, config.grow_params()).grow(&rows, &mut update);
        if tree.is_stump() {
            break;
        }
        for i in 0..n {
            pred[i] += update[i];
        }
        training_loss.push(mse(&pred));
        iterations.push(vec![tree]);
    }

    Ok(GbmModel {
        format_version: MODEL_FORMAT_VERSION,
        task: Task::Regressor,
        n_features: x.cols,
        bin_map,
        classes: Vec::new(),
        base: vec![mean],
        iterations,
        config: *config,
        training_loss,
    })
}

impl GbmModel {
    pub fn n_trees(&self) -> usize {
        self.iterations.iter().map(Vec::len).sum()
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.iterations.iter().flatten()
    }

    fn check_arity(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: row.len() });
        }
        Ok(())
    }

    /// Raw additive scores: one per class, or the single regression value.
    pub fn raw_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(row)?;
        let mut out = self.base.clone();
        for trees in &self.iterations {
            for (o, t) in out.iter_mut().zip(trees) {
                *o += t.predict_row(row);
            }
        }
        Ok(out)
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if self.task != Task::Classifier {
            return Err(Error::InvalidConfig("predict_proba needs a classifier".into()));
        }
        let mut raw = self.raw_row(row)?;
        softmax_in_place(&mut raw);
        Ok(raw)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        (0..x.rows).map(|r| self.predict_proba_row(x.row(r))).collect()
    }

    /// Predicted score for one row. Classifiers take the most probable class,
    /// ties going to the lower score; regressors round half away from zero
    /// and clip into `scale`.
    pub fn predict_row(&self, row: &[f64], scale: ScoreScale) -> Result<i32> {
        match self.task {
            Task::Classifier => {
                let p = self.predict_proba_row(row)?;
                let mut best = 0;
                for (i, v) in p.iter().enumerate() {
                    if *v > p[best] {
                        best = i;
                    }
                }
                Ok(self.classes[best])
            }
            Task::Regressor => Ok(scale.round_clip(self.raw_row(row)?[0])),
        }
    }

    pub fn predict(&self, x: &Matrix, scale: ScoreScale) -> Result<Vec<i32>> {
        (0..x.rows).map(|r| self.predict_row(x.row(r), scale)).collect()
    }

    /// Continuous output: expected score under the class probabilities, or
    /// the unrounded regression value.
    pub fn predict_value(&self, row: &[f64]) -> Result<f64> {
        match self.task {
            Task::Classifier => {
                let p = self.predict_proba_row(row)?;
                Ok(p.iter().zip(&self.classes).map(|(p, &c)| p * c as f64).sum())
            }
            Task::Regressor => Ok(self.raw_row(row)?[0]),
        }
    }

    /// Features referenced by at least one split.
    pub fn used_features(&self) -> BTreeSet<usize> {
        self.trees().flat_map(Tree::split_features).collect()
    }

    /// Reindexes features: new feature `j` is old feature `perm[j]`.
    pub fn permute_features(&self, perm: &[usize]) -> Result<GbmModel> {
        if perm.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: perm.len() });
        }
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if old >= perm.len() || inverse[old] != usize::MAX {
                return Err(Error::InvalidConfig("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let mut out = self.clone();
        out.bin_map.thresholds = perm.iter().map(|&old| self.bin_map.thresholds[old].clone()).collect();
        for t in out.iterations.iter_mut().flatten() {
            for node in t.nodes.iter_mut() {
                if let Node::Split { feature, .. } = node {
                    *feature = inverse[*feature];
                }
            }
        }
        Ok(out)
    }
}
