//! Demographic-predictability probe: a boosting classifier sees only the
//! demographic attributes and its agreement with the true scores is reported.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::{fit_classifier, GbmConfig};
use crate::data::{Attribute, EssayRecord, ScoreScale, Split};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{interpret_kappa, quadratic_weighted_kappa, Concordance, ConfusionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicEncoding {
    /// `attribute=level`, ordered by attribute then level.
    pub columns: Vec<String>,
    pub column_counts: BTreeMap<String, usize>,
    /// Attributes with fewer than two levels, left out of the encoding.
    pub skipped: Vec<String>,
    pub matrix: Matrix,
}

/// One-hot encoding with every level kept, `unknown` included as a level.
pub fn encode_demographics(records: &[EssayRecord], attributes: &[Attribute]) -> Result<DemographicEncoding> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to encode"));
    }
    let mut attrs: Vec<Attribute> = attributes.to_vec();
    attrs.sort();
    attrs.dedup();
    let mut columns = Vec::new();
    let mut column_counts = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut blocks: Vec<(Attribute, usize, Vec<String>)> = Vec::new();
    for attr in attrs {
        let levels: BTreeSet<&str> = records.iter().map(|r| r.demographics.get(attr)).collect();
        if levels.len() < 2 {
            skipped.push(attr.name().to_string());
            continue;
        }
        let levels: Vec<String> = levels.into_iter().map(String::from).collect();
        column_counts.insert(attr.name().to_string(), levels.len());
        blocks.push((attr, columns.len(), levels.clone()));
        columns.extend(levels.iter().map(|l| format!("{}={l}", attr.name())));
    }
    if columns.is_empty() {
        return Err(Error::NoUsableAttributes);
    }
    let mut matrix = Matrix::zeros(records.len(), columns.len());
    for (r, rec) in records.iter().enumerate() {
        for (attr, offset, levels) in &blocks {
            let level = rec.demographics.get(*attr);
            let k = levels.binary_search_by(|l| l.as_str().cmp(level)).expect("level collected above");
            matrix.set(r, offset + k, 1.0);
        }
    }
    Ok(DemographicEncoding { columns, column_counts, skipped, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// The records' own train/test labels.
    Predefined,
    /// Seeded split stratified by score.
    Stratified { test_fraction: f64 },
    /// Predefined when both sides are populated, otherwise stratified 80/20.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationSet {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaWeighting {
    #[default]
    Quadratic,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOptions {
    pub attributes: Vec<Attribute>,
    pub split: SplitPolicy,
    pub evaluate_on: EvaluationSet,
    pub weighting: KappaWeighting,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            attributes: Attribute::ALL.to_vec(),
            split: SplitPolicy::Auto,
            evaluate_on: EvaluationSet::Test,
            weighting: KappaWeighting::Quadratic,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub prompt_name: String,
    pub kappa: f64,
    pub interpretation: Concordance,
    pub weighting: KappaWeighting,
    pub evaluate_on: EvaluationSet,
    pub feature_columns: Vec<String>,
    pub column_counts: BTreeMap<String, usize>,
    pub skipped_attributes: Vec<String>,
    /// Split actually used, e.g. `predefined` or `stratified test_fraction=0.2 seed=7`.
    pub split: String,
    pub train_size: usize,
    pub evaluated_size: usize,
}

/// Seeded split stratified by score; returns `(train, test)` row indices,
/// each ascending.
pub fn stratified_split(scores: &[i32], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test_fraction {test_fraction} outside (0, 1)")));
    }
    let mut by_score: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &s) in scores.iter().enumerate() {
        by_score.entry(s).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut rows) in by_score {
        rows.shuffle(&mut rng);
        let n_test = libm::round(rows.len() as f64 * test_fraction) as usize;
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn unweighted_kappa(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total as f64;
    let rows = cm.row_marginals();
    let cols = cm.col_marginals();
    let observed: f64 = (0..cm.size()).map(|i| cm.counts[i][i] as f64).sum::<f64>() / total;
    let chance: f64 = (0..cm.size()).map(|i| rows[i] as f64 * cols[i] as f64).sum::<f64>() / (total * total);
    if chance >= 1.0 {
        return 1.0;
    }
    (observed - chance) / (1.0 - chance)
}

fn prompt_label(records: &[EssayRecord]) -> String {
    let names: BTreeSet<&str> = records.iter().map(|r| r.prompt_name.as_str()).collect();
    match names.len() {
        1 => names.into_iter().next().unwrap_or_default().to_string(),
        _ => "all".to_string(),
    }
}

/// Fits the classifier on the training rows' demographics and scores its
/// agreement with the true scores. No verdict is attached: the kappa and its
/// band are the output.
pub fn run_probe(records: &[EssayRecord], scale: ScoreScale, gbm: &GbmConfig, options: &ProbeOptions) -> Result<ProbeReport> {
    let encoding = encode_demographics(records, &options.attributes)?;
    for r in records {
        scale.check(r.holistic_score)?;
    }
    let scores: Vec<i32> = records.iter().map(|r| r.holistic_score).collect();

    let predefined = || -> (Vec<usize>, Vec<usize>) {
        let train = (0..records.len()).filter(|&i| records[i].split == Split::Train).collect();
        let test = (0..records.len()).filter(|&i| records[i].split == Split::Test).collect();
        (train, test)
    };
    let stratified = |fraction: f64| -> Result<(Vec<usize>, Vec<usize>, String)> {
        let (train, test) = stratified_split(&scores, fraction, options.seed)?;
        Ok((train, test, format!("stratified test_fraction={fraction} seed={}", options.seed)))
    };
    let (train, test, split) = match options.split {
        SplitPolicy::Predefined => {
            let (a, b) = predefined();
            (a, b, "predefined".to_string())
        }
        SplitPolicy::Stratified { test_fraction } => stratified(test_fraction)?,
        SplitPolicy::Auto => {
            let (a, b) = predefined();
            if a.is_empty() || b.is_empty() {
                stratified(0.2)?
            } else {
                (a, b, "predefined".to_string())
            }
        }
    };
    if train.is_empty() {
        return Err(Error::DegenerateSplit("empty training split"));
    }
    let eval_rows: Vec<usize> = match options.evaluate_on {
        EvaluationSet::Test => test,
        EvaluationSet::All => (0..records.len()).collect(),
    };
    if eval_rows.is_empty() {
        return Err(Error::DegenerateSplit("empty evaluation split"));
    }

    let take = |rows: &[usize]| -> Matrix {
        let mut m = Matrix::zeros(rows.len(), encoding.matrix.cols);
        for (i, &r) in rows.iter().enumerate() {
            m.data[i * m.cols..(i + 1) * m.cols].copy_from_slice(encoding.matrix.row(r));
        }
        m
    };
    let y_train: Vec<i32> = train.iter().map(|&i| scores[i]).collect();
    let model = fit_classifier(&take(&train), &y_train, gbm)?;
    let predicted = model.predict(&take(&eval_rows), scale)?;
    let cm = ConfusionMatrix::from_pairs(eval_rows.iter().map(|&i| scores[i]).zip(predicted), scale)?;
    let kappa = match options.weighting {
        KappaWeighting::Quadratic => quadratic_weighted_kappa(&cm)?.kappa,
        KappaWeighting::Unweighted => unweighted_kappa(&cm),
    };
    Ok(ProbeReport {
        prompt_name: prompt_label(records),
        kappa,
        interpretation: interpret_kappa(kappa)?,
        weighting: options.weighting,
        evaluate_on: options.evaluate_on,
        feature_columns: encoding.columns,
        column_counts: encoding.column_counts,
        skipped_attributes: encoding.skipped,
        split,
        train_size: train.len(),
        evaluated_size: eval_rows.len(),
    })
}
