//! Explanations for a fitted scorer: permutation importance, sampled
//! Shapley attributions and local linear surrogates.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::boosting::GbmModel;
use crate::data::ScoreScale;
use crate::error::{Error, Result};
use crate::linalg::{ols_fit, Matrix};
use crate::metrics::{accuracy, qwk_scores, r_squared};

/// Anything that maps a feature row to a number.
pub trait Scorer {
    /// Continuous output used for attributions.
    fn value(&self, row: &[f64]) -> Result<f64>;

    /// Score on the scale, used by the classification metrics.
    fn predict_score(&self, row: &[f64], scale: ScoreScale) -> Result<i32> {
        Ok(scale.round_clip(self.value(row)?))
    }

    /// Features the scorer can depend on, when known.
    fn used_features(&self) -> Option<BTreeSet<usize>> {
        None
    }
}

impl Scorer for GbmModel {
    fn value(&self, row: &[f64]) -> Result<f64> {
        self.predict_value(row)
    }

    fn predict_score(&self, row: &[f64], scale: ScoreScale) -> Result<i32> {
        self.predict_row(row, scale)
    }

    fn used_features(&self) -> Option<BTreeSet<usize>> {
        Some(GbmModel::used_features(self))
    }
}

/// Wraps a plain function as a [`Scorer`].
pub struct FnScorer<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Scorer for FnScorer<F> {
    fn value(&self, row: &[f64]) -> Result<f64> {
        Ok((self.0)(row))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    Qwk,
    Accuracy,
    RSquared,
}

impl ImportanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            ImportanceMetric::Qwk => "qwk",
            ImportanceMetric::Accuracy => "accuracy",
            ImportanceMetric::RSquared => "r_squared",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub index: usize,
    pub mean_drop: f64,
    pub std_dev: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric: ImportanceMetric,
    pub baseline: f64,
    pub repeats: usize,
    pub seed: u64,
    /// In feature order; `rank` gives the ordering by drop.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn ranked(&self) -> Vec<&FeatureImportance> {
        let mut out: Vec<&FeatureImportance> = self.features.iter().collect();
        out.sort_by_key(|f| f.rank);
        out
    }

    /// `feature,mean_drop,sd,rank`, rows in rank order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean_drop,sd,rank\n");
        for f in self.ranked() {
            let _ = writeln!(out, "{},{},{},{}", csv_field(&f.feature), f.mean_drop, f.std_dev, f.rank);
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        String::from(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceOptions {
    pub metric: ImportanceMetric,
    pub scale: ScoreScale,
    pub repeats: usize,
    pub seed: u64,
}

fn feature_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("f{j}"))
}

fn evaluate<S: Scorer + ?Sized>(model: &S, x: &Matrix, y: &[f64], opts: &ImportanceOptions) -> Result<f64> {
    match opts.metric {
        ImportanceMetric::RSquared => {
            let pred = (0..x.rows).map(|r| model.value(x.row(r))).collect::<Result<Vec<f64>>>()?;
            Ok(r_squared(y, &pred))
        }
        ImportanceMetric::Qwk | ImportanceMetric::Accuracy => {
            let truth: Vec<i32> = y.iter().map(|&v| opts.scale.round_clip(v)).collect();
            let pred = (0..x.rows).map(|r| model.predict_score(x.row(r), opts.scale)).collect::<Result<Vec<i32>>>()?;
            if opts.metric == ImportanceMetric::Qwk {
                Ok(qwk_scores(&truth, &pred, opts.scale)?.kappa)
            } else {
                Ok(accuracy(&truth, &pred))
            }
        }
    }
}

/// Metric on intact data minus the metric after shuffling one column,
/// averaged over `repeats` seeded shuffles per feature. Features the model
/// never reads are reported as exactly zero without evaluation.
pub fn permutation_importance<S: Scorer + ?Sized>(
    model: &S,
    x: &Matrix,
    y: &[f64],
    names: &[String],
    opts: &ImportanceOptions,
) -> Result<ImportanceReport> {
    if x.rows < 2 {
        return Err(Error::EmptyInput("permutation importance needs at least two rows"));
    }
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch { expected: x.rows, actual: y.len() });
    }
    if opts.repeats == 0 {
        return Err(Error::InvalidConfig(String::from("repeats must be at least 1")));
    }
    let baseline = evaluate(model, x, y, opts)?;
    let used = model.used_features();
    let mut features = Vec::with_capacity(x.cols);
    let mut work = x.clone();
    let mut column: Vec<f64> = vec![0.0; x.rows];
    for j in 0..x.cols {
        let unused = used.as_ref().is_some_and(|u| !u.contains(&j));
        let mut drops = Vec::with_capacity(opts.repeats);
        if !unused {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(j as u64);
            for (r, c) in column.iter_mut().enumerate() {
                *c = x.get(r, j);
            }
            for _ in 0..opts.repeats {
                let mut shuffled = column.clone();
                shuffled.shuffle(&mut rng);
                for (r, &v) in shuffled.iter().enumerate() {
                    work.set(r, j, v);
                }
                drops.push(baseline - evaluate(model, &work, y, opts)?);
            }
            for (r, &v) in column.iter().enumerate() {
                work.set(r, j, v);
            }
        }
        let (mean_drop, std_dev) = mean_sd(&drops);
        features.push(FeatureImportance { feature: feature_name(names, j), index: j, mean_drop, std_dev, rank: 0 });
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| features[b].mean_drop.total_cmp(&features[a].mean_drop).then(a.cmp(&b)));
    for (rank, &j) in order.iter().enumerate() {
        features[j].rank = rank + 1;
    }
    Ok(ImportanceReport { metric: opts.metric, baseline, repeats: opts.repeats, seed: opts.seed, features })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub attributions: Vec<f64>,
    /// Mean model output over the background rows.
    pub baseline: f64,
    pub output: f64,
    pub n_samples: usize,
}

impl AttributionVector {
    /// `sum(attributions) - (output - baseline)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.attributions.iter().sum::<f64>() - (self.output - self.baseline)
    }
}

/// Monte-Carlo permutation Shapley estimate for one instance.
///
/// Each sample draws a feature ordering and a background row, then adds
/// the features of `x` in that order, crediting each with the change in
/// output. Background rows are visited round-robin over a seeded shuffle,
/// so when `n_samples` is a multiple of the background size the
/// attributions sum to `output - baseline` up to rounding.
pub fn shapley_sample<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<AttributionVector> {
    if n_samples < 1 {
        return Err(Error::InvalidConfig(String::from("n_samples must be at least 1")));
    }
    if background.rows == 0 {
        return Err(Error::EmptyInput("background set is empty"));
    }
    if background.cols != x.len() {
        return Err(Error::DimensionMismatch { expected: background.cols, actual: x.len() });
    }
    let p = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bg_order: Vec<usize> = (0..background.rows).collect();
    bg_order.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..p).collect();
    let mut phi = vec![0.0; p];
    let mut z = vec![0.0; p];
    for s in 0..n_samples {
        let b = background.row(bg_order[s % background.rows]);
        order.shuffle(&mut rng);
        z.copy_from_slice(b);
        let mut prev = model.value(&z)?;
        for &j in &order {
            if x[j] == b[j] {
                continue;
            }
            z[j] = x[j];
            let cur = model.value(&z)?;
            phi[j] += cur - prev;
            prev = cur;
        }
    }
    for v in &mut phi {
        *v /= n_samples as f64;
    }
    let mut baseline = 0.0;
    for r in 0..background.rows {
        baseline += model.value(background.row(r))?;
    }
    baseline /= background.rows as f64;
    Ok(AttributionVector { attributions: phi, baseline, output: model.value(x)?, n_samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateWeight {
    pub index: usize,
    /// Slope in the feature's own units.
    pub weight: f64,
    /// Slope per standard deviation of the perturbation, the ranking key.
    pub standardized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateExplanation {
    pub features: Vec<SurrogateWeight>,
    pub intercept: f64,
    pub fidelity: f64,
    pub kernel_width: f64,
    pub n_perturbations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    pub n_perturbations: usize,
    pub kernel_width: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        SurrogateOptions { n_perturbations: 1000, kernel_width: 3.0, k: 5, seed: 0 }
    }
}

/// Per-column sample standard deviations, the usual perturbation scales.
pub fn column_std_devs(x: &Matrix) -> Vec<f64> {
    let mut col = Vec::with_capacity(x.rows);
    (0..x.cols)
        .map(|j| {
            col.clear();
            col.extend((0..x.rows).map(|r| x.get(r, j)));
            mean_sd(&col).1
        })
        .collect()
}

/// Weighted linear fit to the model around `x`.
///
/// Perturbations are `x + scale * N(0, 1)` per feature; each is weighted by
/// `exp(-d^2 / width^2)` with `d` the distance in standard-deviation units.
/// Features with zero scale are held fixed and never reported. Fidelity is
/// the weighted R² of the fit.
pub fn local_surrogate<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    scales: &[f64],
    opts: &SurrogateOptions,
) -> Result<SurrogateExplanation> {
    if scales.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: scales.len() });
    }
    if !(opts.kernel_width > 0.0) {
        return Err(Error::InvalidConfig(String::from("kernel_width must be positive")));
    }
    let active: Vec<usize> = (0..x.len()).filter(|&j| scales[j].is_finite() && scales[j] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::ZeroPerturbation);
    }
    let n = opts.n_perturbations;
    if n <= active.len() {
        return Err(Error::Underdetermined { rows: n, cols: active.len() + 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cols = active.len() + 1;
    let mut design = Matrix::zeros(n, cols);
    let mut target = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut z = x.to_vec();
    let mut eps = vec![0.0; active.len()];
    for i in 0..n {
        let mut d2 = 0.0;
        for (a, &j) in active.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            eps[a] = e;
            z[j] = x[j] + scales[j] * e;
            d2 += e * e;
        }
        let y = model.value(&z)?;
        let w = libm::exp(-d2 / (opts.kernel_width * opts.kernel_width));
        let sw = libm::sqrt(w);
        design.set(i, 0, sw);
        for (a, &e) in eps.iter().enumerate() {
            design.set(i, a + 1, sw * e);
        }
        target[i] = sw * y;
        weights[i] = w;
        ys[i] = y;
    }
    let fit = ols_fit(&design, &target)?;
    let beta = &fit.coefficients;

    let wsum: f64 = weights.iter().sum();
    let fidelity = if wsum > 0.0 {
        let ymean = weights.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / wsum;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for i in 0..n {
            let pred = (0..cols).map(|c| design.get(i, c) * beta[c]).sum::<f64>();
            let r = target[i] - pred;
            ss_res += r * r;
            ss_tot += weights[i] * (ys[i] - ymean) * (ys[i] - ymean);
        }
        if ss_tot > 0.0 {
            (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
        } else {
            1.0
        }
    } else {
        0.0
    };

    let mut ranked: Vec<SurrogateWeight> = active
        .iter()
        .enumerate()
        .map(|(a, &j)| SurrogateWeight { index: j, weight: beta[a + 1] / scales[j], standardized: beta[a + 1] })
        .collect();
    ranked.sort_by(|a, b| libm::fabs(b.standardized).total_cmp(&libm::fabs(a.standardized)).then(a.index.cmp(&b.index)));
    ranked.truncate(opts.k);
    Ok(SurrogateExplanation {
        features: ranked,
        intercept: beta[0],
        fidelity,
        kernel_width: opts.kernel_width,
        n_perturbations: n,
    })
}
