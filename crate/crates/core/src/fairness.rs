//! Group fairness: per-class true/false positive rates, equal opportunity and
//! equalized-odds gaps (one-vs-rest per score class), and the regression
//! metrics OSA and OSD with a permutation significance test.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Attribute, EssayRecord, GroupPartition, PredictionRecord, ScoreScale};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, OlsFit, OlsSolver};

/// Counts and rates for one group at one score class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub true_positives: u64,
    pub false_positives: u64,
    /// Essays in the group whose true score is this class.
    pub positive_support: u64,
    /// Essays in the group whose true score is any other class.
    pub negative_support: u64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub attribute: Attribute,
    pub scale: ScoreScale,
    /// Group labels in lexicographic order.
    pub groups: Vec<String>,
    /// `rates[g][k]` for group `groups[g]` and class `scale.min() + k`.
    pub rates: Vec<Vec<ClassRates>>,
    /// Predictions skipped because the essay's label is unknown.
    pub skipped_unknown: usize,
}

impl GroupRates {
    pub fn class(&self, group: &str, score: i32) -> Option<&ClassRates> {
        let g = self.groups.iter().position(|l| l == group)?;
        let k = self.scale.index(score).ok()?;
        Some(&self.rates[g][k])
    }

    fn tprs(&self, k: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.rates.iter().map(move |r| r[k].tpr)
    }

    fn fprs(&self, k: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.rates.iter().map(move |r| r[k].fpr)
    }
}

/// Exact per-group, per-class counting of TPR and FPR.
pub fn group_rates(
    preds: &[PredictionRecord],
    partition: &GroupPartition,
    scale: ScoreScale,
) -> Result<GroupRates> {
    let groups: Vec<String> = partition.groups().into_iter().map(ToString::to_string).collect();
    let index: BTreeMap<&str, usize> = groups.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let n = scale.len();
    // joint[g][i][j]
    let mut joint = vec![vec![vec![0u64; n]; n]; groups.len()];
    let mut skipped_unknown = 0;
    for p in preds {
        let g = match partition.group_of(&p.essay_id) {
            Some(label) => index[label],
            None if partition.excluded.contains(&p.essay_id) => {
                skipped_unknown += 1;
                continue;
            }
            None => return Err(Error::MissingGroup(p.essay_id.clone())),
        };
        let i = scale.index(p.true_score)?;
        let j = scale.index(p.predicted_score)?;
        joint[g][i][j] += 1;
    }
    let populated = joint.iter().filter(|m| m.iter().flatten().any(|&c| c > 0)).count();
    if populated < 2 {
        return Err(Error::DegeneratePartition { attribute: partition.attribute.name().to_string() });
    }

    let rates = joint
        .iter()
        .map(|m| {
            let total: u64 = m.iter().flatten().sum();
            (0..n)
                .map(|k| {
                    let positive_support: u64 = m[k].iter().sum();
                    let negative_support = total - positive_support;
                    let true_positives = m[k][k];
                    let predicted_k: u64 = m.iter().map(|row| row[k]).sum();
                    let false_positives = predicted_k - true_positives;
                    ClassRates {
                        true_positives,
                        false_positives,
                        positive_support,
                        negative_support,
                        tpr: ratio(true_positives, positive_support),
                        fpr: ratio(false_positives, negative_support),
                    }
                })
                .collect()
        })
        .collect();
    Ok(GroupRates { attribute: partition.attribute, scale, groups, rates, skipped_unknown })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Largest absolute pairwise difference among the defined values; `None`
/// when fewer than two are defined.
fn max_pairwise_gap(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.len() < 2 {
        return None;
    }
    let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
    Some(hi - lo)
}

/// TPR gap at one score class; max pairwise difference for more than two
/// groups.
pub fn equal_opportunity_gap(rates: &GroupRates, score: i32) -> Result<Option<f64>> {
    let k = rates.scale.index(score)?;
    Ok(max_pairwise_gap(rates.tprs(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub score: i32,
    pub tpr_gap: Option<f64>,
    pub fpr_gap: Option<f64>,
    /// `max(tpr_gap, fpr_gap)`; undefined if either component is.
    pub eo_gap: Option<f64>,
}

pub fn equalized_odds_gap(rates: &GroupRates, score: i32) -> Result<GapEntry> {
    let k = rates.scale.index(score)?;
    let tpr_gap = max_pairwise_gap(rates.tprs(k));
    let fpr_gap = max_pairwise_gap(rates.fprs(k));
    let eo_gap = match (tpr_gap, fpr_gap) {
        (Some(t), Some(f)) => Some(t.max(f)),
        _ => None,
    };
    Ok(GapEntry { score, tpr_gap, fpr_gap, eo_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapAggregation {
    MaxPairwise,
}

/// Equalized-odds gaps for every class of the scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsGapTable {
    pub attribute: Attribute,
    pub aggregation: GapAggregation,
    pub entries: Vec<GapEntry>,
}

pub fn odds_gap_table(rates: &GroupRates) -> OddsGapTable {
    let entries = rates
        .scale
        .scores()
        .map(|s| equalized_odds_gap(rates, s).expect("score comes from the scale"))
        .collect();
    OddsGapTable { attribute: rates.attribute, aggregation: GapAggregation::MaxPairwise, entries }
}

/// One-hot demographic design with an intercept and one dropped reference
/// level per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub matrix: Matrix,
    pub columns: Vec<String>,
    /// Attribute and dropped reference level, for each included attribute.
    pub references: Vec<(Attribute, String)>,
    pub warnings: Vec<String>,
}

/// Pairs each prediction with its corpus record.
pub fn join_corpus<'a>(
    preds: &[PredictionRecord],
    corpus: &'a [EssayRecord],
) -> Result<Vec<&'a EssayRecord>> {
    let by_id: BTreeMap<&str, &EssayRecord> = corpus.iter().map(|r| (r.essay_id.as_str(), r)).collect();
    preds
        .iter()
        .map(|p| by_id.get(p.essay_id.as_str()).copied().ok_or_else(|| Error::MissingEssay(p.essay_id.clone())))
        .collect()
}

/// Builds the regression design. Unknown labels act as an ordinary level so
/// that every prediction keeps its row; the lexicographically first level is
/// the reference.
pub fn build_design_matrix(
    preds: &[PredictionRecord],
    corpus: &[EssayRecord],
    attributes: &[Attribute],
) -> Result<DesignMatrix> {
    let joined = join_corpus(preds, corpus)?;
    let mut columns = vec!["intercept".to_string()];
    let mut references = Vec::new();
    let mut warnings = Vec::new();
    let mut blocks: Vec<(Attribute, Vec<String>)> = Vec::new();
    for &a in attributes {
        let levels: BTreeSet<&str> = joined.iter().map(|r| r.demographics.get(a)).collect();
        if levels.len() < 2 {
            warnings.push(format!("attribute {a} has a single level among predictions; excluded"));
            continue;
        }
        let mut it = levels.into_iter();
        let reference = it.next().expect("two levels").to_string();
        let kept: Vec<String> = it.map(ToString::to_string).collect();
        for l in &kept {
            columns.push(format!("{a}={l}"));
        }
        references.push((a, reference));
        blocks.push((a, kept));
    }
    if blocks.is_empty() {
        return Err(Error::NoUsableAttributes);
    }
    let mut matrix = Matrix::zeros(joined.len(), columns.len());
    for (r, rec) in joined.iter().enumerate() {
        matrix.set(r, 0, 1.0);
        let mut c = 1;
        for (a, kept) in &blocks {
            let label = rec.demographics.get(*a);
            for l in kept {
                if l == label {
                    matrix.set(r, c, 1.0);
                }
                c += 1;
            }
        }
    }
    Ok(DesignMatrix { matrix, columns, references, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressionMetric {
    /// Squared difference `(S - H)^2` as the response.
    #[serde(rename = "OSA")]
    Osa,
    /// Signed difference `S - H` as the response.
    #[serde(rename = "OSD")]
    Osd,
}

impl RegressionMetric {
    pub fn response(&self, p: &PredictionRecord) -> f64 {
        let d = (p.predicted_score - p.true_score) as f64;
        match self {
            RegressionMetric::Osa => d * d,
            RegressionMetric::Osd => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub permutations: usize,
    pub seed: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        PermutationOptions { permutations: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFairnessResult {
    pub metric: RegressionMetric,
    pub r_squared: f64,
    pub coefficients: Vec<(String, f64)>,
    pub permutation_p_value: f64,
    pub permutations: usize,
    pub n: usize,
    pub ridge: bool,
    pub constant_target: bool,
    pub warnings: Vec<String>,
}

/// Regresses the chosen response on demographic indicators.
///
/// Significance compares the observed R² with R² under `B` random
/// reassignments of demographic rows to responses. Each permutation draws
/// from its own ChaCha stream of the master seed, so the result does not
/// depend on evaluation order. Permuting design rows is equivalent to
/// permuting the response, which keeps the Gram inverse fixed.
pub fn regression_fairness(
    metric: RegressionMetric,
    preds: &[PredictionRecord],
    corpus: &[EssayRecord],
    attributes: &[Attribute],
    options: PermutationOptions,
) -> Result<RegressionFairnessResult> {
    let design = build_design_matrix(preds, corpus, attributes)?;
    let y: Vec<f64> = preds.iter().map(|p| metric.response(p)).collect();
    let solver = OlsSolver::new(&design.matrix)?;
    let observed: OlsFit = solver.fit(&y)?;

    let mut exceed = 0usize;
    let mut shuffled = y.clone();
    for b in 0..options.permutations {
        shuffled.copy_from_slice(&y);
        let mut rng = permutation_rng(options.seed, b as u64);
        shuffled.shuffle(&mut rng);
        let r2 = solver.fit(&shuffled)?.r_squared;
        if r2 >= observed.r_squared - 1e-12 {
            exceed += 1;
        }
    }
    // The observed labelling counts as one of the permutations, so the
    // p-value is never zero.
    let permutation_p_value = (exceed + 1) as f64 / (options.permutations + 1) as f64;

    Ok(RegressionFairnessResult {
        metric,
        r_squared: observed.r_squared,
        coefficients: design.columns.iter().cloned().zip(observed.coefficients.iter().copied()).collect(),
        permutation_p_value,
        permutations: options.permutations,
        n: preds.len(),
        ridge: observed.ridge,
        constant_target: observed.constant_target,
        warnings: design.warnings,
    })
}

/// Independent generator for permutation `index` of a run seeded `seed`.
pub fn permutation_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn osa(
    preds: &[PredictionRecord],
    corpus: &[EssayRecord],
    attributes: &[Attribute],
    options: PermutationOptions,
) -> Result<RegressionFairnessResult> {
    regression_fairness(RegressionMetric::Osa, preds, corpus, attributes, options)
}

pub fn osd(
    preds: &[PredictionRecord],
    corpus: &[EssayRecord],
    attributes: &[Attribute],
    options: PermutationOptions,
) -> Result<RegressionFairnessResult> {
    regression_fairness(RegressionMetric::Osd, preds, corpus, attributes, options)
}
