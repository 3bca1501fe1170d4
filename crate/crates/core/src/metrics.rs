//! Agreement and robustness metrics over a fixed score scale.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::data::{PredictionRecord, ScoreScale};
use crate::error::{Error, Result};

/// Square count matrix; `counts[i][j]` tallies true score `min + i`
/// predicted as `min + j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub scale: ScoreScale,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn zeros(scale: ScoreScale) -> Self {
        let n = scale.len();
        ConfusionMatrix { scale, counts: vec![vec![0; n]; n], total: 0 }
    }

    pub fn from_pairs<I>(pairs: I, scale: ScoreScale) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, i32)>,
    {
        let mut cm = ConfusionMatrix::zeros(scale);
        for (truth, pred) in pairs {
            let i = scale.index(truth)?;
            let j = scale.index(pred)?;
            cm.counts[i][j] += 1;
            cm.total += 1;
        }
        if cm.total == 0 {
            return Err(Error::EmptyInput("confusion matrix needs at least one prediction"));
        }
        Ok(cm)
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn row_marginals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginals(&self) -> Vec<u64> {
        let n = self.size();
        (0..n).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Swaps the roles of the two raters.
    pub fn transpose(&self) -> Self {
        let n = self.size();
        let counts = (0..n).map(|i| (0..n).map(|j| self.counts[j][i]).collect()).collect();
        ConfusionMatrix { scale: self.scale, counts, total: self.total }
    }

    /// CSV with one row per true score and one column per predicted score.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for s in self.scale.scores() {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{}", self.scale.score_at(i));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_confusion_matrix(preds: &[PredictionRecord], scale: ScoreScale) -> Result<ConfusionMatrix> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions"));
    }
    ConfusionMatrix::from_pairs(preds.iter().map(|p| (p.true_score, p.predicted_score)), scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Weighted observed disagreement, `sum w * O`.
    pub numerator: f64,
    /// Weighted chance disagreement, `sum w * E`.
    pub denominator: f64,
    /// Set when the chance disagreement is zero and kappa was defined as 1.
    pub degenerate: bool,
}

/// Quadratic weighted kappa with weights `(i - j)^2 / (N - 1)^2`, `N` the
/// number of categories on the scale (observed or not).
pub fn quadratic_weighted_kappa(cm: &ConfusionMatrix) -> Result<KappaResult> {
    if cm.total == 0 {
        return Err(Error::EmptyInput("confusion matrix is empty"));
    }
    let n = cm.size();
    let total = cm.total as f64;
    let rows = cm.row_marginals();
    let cols = cm.col_marginals();
    let span = ((n - 1) * (n - 1)) as f64;

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = i.abs_diff(j) as f64;
            let w = d * d / span;
            numerator += w * cm.counts[i][j] as f64;
            denominator += w * (rows[i] as f64 * cols[j] as f64) / total;
        }
    }
    if denominator == 0.0 {
        return Ok(KappaResult { kappa: 1.0, numerator, denominator, degenerate: true });
    }
    Ok(KappaResult { kappa: 1.0 - numerator / denominator, numerator, denominator, degenerate: false })
}

/// QWK straight from prediction records.
pub fn qwk(preds: &[PredictionRecord], scale: ScoreScale) -> Result<KappaResult> {
    quadratic_weighted_kappa(&build_confusion_matrix(preds, scale)?)
}

/// QWK from parallel score slices.
pub fn qwk_scores(truth: &[i32], predicted: &[i32], scale: ScoreScale) -> Result<KappaResult> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: predicted.len() });
    }
    let cm = ConfusionMatrix::from_pairs(truth.iter().copied().zip(predicted.iter().copied()), scale)?;
    quadratic_weighted_kappa(&cm)
}

/// Concordance bands for kappa values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concordance {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Concordance {
    pub fn label(&self) -> &'static str {
        match self {
            Concordance::Poor => "poor",
            Concordance::Slight => "slight",
            Concordance::Fair => "fair",
            Concordance::Moderate => "moderate",
            Concordance::Substantial => "substantial",
            Concordance::AlmostPerfect => "almost perfect",
        }
    }
}

impl fmt::Display for Concordance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps kappa to its concordance band. Bands are upper-inclusive:
/// (0, 0.2] slight, (0.2, 0.4] fair, and so on; zero and below are poor.
pub fn interpret_kappa(kappa: f64) -> Result<Concordance> {
    if kappa.is_nan() || kappa > 1.0 {
        return Err(Error::KappaDomain(kappa));
    }
    Ok(if kappa <= 0.0 {
        Concordance::Poor
    } else if kappa <= 0.20 {
        Concordance::Slight
    } else if kappa <= 0.40 {
        Concordance::Fair
    } else if kappa <= 0.60 {
        Concordance::Moderate
    } else if kappa <= 0.80 {
        Concordance::Substantial
    } else {
        Concordance::AlmostPerfect
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub scale: ScoreScale,
    /// Recall per class; `None` where the class has no support.
    pub per_class_recall: Vec<Option<f64>>,
    pub per_class_support: Vec<u64>,
    pub edge_classes: (i32, i32),
    pub within_one_accuracy: f64,
}

impl EdgeReport {
    pub fn recall(&self, score: i32) -> Option<f64> {
        self.scale.index(score).ok().and_then(|i| self.per_class_recall[i])
    }

    /// Labels for undefined recalls, for reports.
    pub fn undefined_classes(&self) -> Vec<i32> {
        self.per_class_recall
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_none())
            .map(|(i, _)| self.scale.score_at(i))
            .collect()
    }
}

pub fn edge_robustness(cm: &ConfusionMatrix) -> EdgeReport {
    let n = cm.size();
    let support = cm.row_marginals();
    let per_class_recall = (0..n)
        .map(|k| (support[k] > 0).then(|| cm.counts[k][k] as f64 / support[k] as f64))
        .collect();
    let mut near = 0u64;
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) <= 1 {
                near += cm.counts[i][j];
            }
        }
    }
    let within_one_accuracy = if cm.total == 0 { 0.0 } else { near as f64 / cm.total as f64 };
    EdgeReport {
        scale: cm.scale,
        per_class_recall,
        per_class_support: support,
        edge_classes: (cm.scale.min(), cm.scale.max()),
        within_one_accuracy,
    }
}

/// Fraction of exact matches.
pub fn accuracy(truth: &[i32], predicted: &[i32]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Coefficient of determination of `predicted` against `truth`; 0 for a
/// constant target.
pub fn r_squared(truth: &[f64], predicted: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    let ss_res: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p) * (t - p)).sum();
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scale(a: i32, b: i32) -> ScoreScale {
        ScoreScale::new(a, b).unwrap()
    }

    /// Direct evaluation of the kappa formula from raw vectors.
    fn kappa_oracle(t: &[i32], p: &[i32], s: ScoreScale) -> f64 {
        let n = s.len();
        let mut o = vec![vec![0.0f64; n]; n];
        for (a, b) in t.iter().zip(p) {
            o[(a - s.min()) as usize][(b - s.min()) as usize] += 1.0;
        }
        let total = t.len() as f64;
        let mut hist_t = vec![0.0; n];
        let mut hist_p = vec![0.0; n];
        for &a in t {
            hist_t[(a - s.min()) as usize] += 1.0;
        }
        for &b in p {
            hist_p[(b - s.min()) as usize] += 1.0;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / ((n as f64 - 1.0) * (n as f64 - 1.0));
                let e = hist_t[i] * hist_p[j] / total;
                num += w * o[i][j];
                den += w * e;
            }
        }
        1.0 - num / den
    }

    #[test]
    fn hand_tally() {
        let preds = [PredictionRecord::new("a", 1, 1), PredictionRecord::new("b", 1, 2)];
        let cm = build_confusion_matrix(&preds, scale(1, 2)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 0]]);
        assert_eq!(cm.total, 2);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(build_confusion_matrix(&[], scale(1, 6)).is_err());
    }

    #[test]
    fn random_pairs_match_counting_oracle() {
        let s = scale(1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(i32, i32)> = (0..500).map(|_| (rng.random_range(1..=6), rng.random_range(1..=6))).collect();
        let cm = ConfusionMatrix::from_pairs(pairs.iter().copied(), s).unwrap();
        for i in 1..=6 {
            for j in 1..=6 {
                let tally = pairs.iter().filter(|&&(a, b)| a == i && b == j).count() as u64;
                assert_eq!(cm.counts[(i - 1) as usize][(j - 1) as usize], tally);
            }
        }
        assert_eq!(cm.total, 500);
    }

    #[test]
    fn perfect_agreement() {
        let v = [1, 2, 3, 4, 5, 6];
        let k = qwk_scores(&v, &v, scale(1, 6)).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert!(!k.degenerate);
    }

    #[test]
    fn swapped_pairs_match_formula() {
        let s = scale(1, 6);
        let t = [1, 1, 2, 2];
        let p = [2, 2, 1, 1];
        let k = qwk_scores(&t, &p, s).unwrap();
        let oracle = kappa_oracle(&t, &p, s);
        assert!((k.kappa - oracle).abs() < 1e-12);
        // O has 4 cells off by one: sum w O = 4/25; E = 2*2/4 = 1 in each
        // off-diagonal cell of the 2x2 block: sum w E = 2/25; kappa = -1.
        assert!((k.kappa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_pair_is_degenerate() {
        let v = [3, 3, 3];
        let k = qwk_scores(&v, &v, scale(1, 6)).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert!(k.degenerate);
        assert_eq!(k.denominator, 0.0);
    }

    #[test]
    fn table_bands() {
        assert_eq!(interpret_kappa(0.75).unwrap(), Concordance::Substantial);
        assert_eq!(interpret_kappa(-0.2).unwrap(), Concordance::Poor);
        assert_eq!(interpret_kappa(0.81).unwrap(), Concordance::AlmostPerfect);
        assert_eq!(interpret_kappa(0.20).unwrap(), Concordance::Slight);
        assert_eq!(interpret_kappa(0.2000001).unwrap(), Concordance::Fair);
        assert_eq!(interpret_kappa(1.0).unwrap(), Concordance::AlmostPerfect);
        assert!(interpret_kappa(1.0000001).is_err());
        assert!(interpret_kappa(f64::NAN).is_err());
        assert_eq!(interpret_kappa(f64::NEG_INFINITY).unwrap(), Concordance::Poor);
    }

    #[test]
    fn perfect_edges() {
        let v = [1, 2, 3, 4, 5, 6];
        let cm = ConfusionMatrix::from_pairs(v.iter().map(|&x| (x, x)), scale(1, 6)).unwrap();
        let e = edge_robustness(&cm);
        assert!(e.per_class_recall.iter().all(|r| *r == Some(1.0)));
        assert_eq!(e.within_one_accuracy, 1.0);
        assert_eq!(e.edge_classes, (1, 6));
    }

    #[test]
    fn missing_support_is_flagged() {
        let cm = ConfusionMatrix::from_pairs([(1, 1), (2, 3), (5, 5)], scale(1, 6)).unwrap();
        let e = edge_robustness(&cm);
        assert_eq!(e.recall(6), None);
        assert_eq!(e.recall(2), Some(0.0));
        assert_eq!(e.undefined_classes(), vec![3, 4, 6]);
        assert_eq!(e.per_class_support.iter().sum::<u64>(), 3);
    }

    #[test]
    fn collapsed_extremes_have_lower_recall() {
        // Normal-like truth; the classifier pulls a share of every edge
        // essay one step inward, while interior classes stay mostly right.
        let support = [20u64, 80, 200, 200, 80, 20];
        let mut pairs = Vec::new();
        for (k, &n) in support.iter().enumerate() {
            let score = k as i32 + 1;
            let wrong = match score {
                1 | 6 => n * 6 / 10,
                2 | 5 => n * 3 / 10,
                _ => n / 10,
            };
            for m in 0..n {
                let pred = if m < wrong {
                    if score <= 3 { score + 1 } else { score - 1 }
                } else {
                    score
                };
                pairs.push((score, pred));
            }
        }
        let cm = ConfusionMatrix::from_pairs(pairs.iter().copied(), scale(1, 6)).unwrap();
        let e = edge_robustness(&cm);
        // oracle tally
        let recall = |s: i32| {
            let sup = pairs.iter().filter(|p| p.0 == s).count() as f64;
            pairs.iter().filter(|p| p.0 == s && p.1 == s).count() as f64 / sup
        };
        for s in 1..=6 {
            assert_eq!(e.recall(s).unwrap(), recall(s));
        }
        let interior_min = (2..=5).map(|s| e.recall(s).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(e.recall(1).unwrap() < interior_min);
        assert!(e.recall(6).unwrap() < interior_min);
    }

    #[test]
    fn csv_export_layout() {
        let cm = ConfusionMatrix::from_pairs([(1, 2)], scale(1, 2)).unwrap();
        assert_eq!(cm.to_csv(), "true\\predicted,1,2\n1,0,1\n2,0,0\n");
    }

    #[test]
    fn r_squared_constant_target() {
        assert_eq!(r_squared(&[1.0, 1.0], &[0.0, 2.0]), 0.0);
        assert_eq!(r_squared(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = Vec<(i32, i32)>> {
            proptest::collection::vec((1..=6i32, 1..=6i32), 1..80)
        }

        proptest! {
            #[test]
            fn kappa_ignores_order(mut v in pairs(), seed in any::<u64>()) {
                let s = ScoreScale::new(1, 6).unwrap();
                let a = quadratic_weighted_kappa(&ConfusionMatrix::from_pairs(v.iter().copied(), s).unwrap()).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                use rand::seq::SliceRandom;
                v.shuffle(&mut rng);
                let b = quadratic_weighted_kappa(&ConfusionMatrix::from_pairs(v.iter().copied(), s).unwrap()).unwrap();
                prop_assert_eq!(a.kappa, b.kappa);
            }

            #[test]
            fn kappa_symmetric_in_raters(v in pairs()) {
                let s = ScoreScale::new(1, 6).unwrap();
                let cm = ConfusionMatrix::from_pairs(v.iter().copied(), s).unwrap();
                let a = quadratic_weighted_kappa(&cm).unwrap();
                let b = quadratic_weighted_kappa(&cm.transpose()).unwrap();
                prop_assert!((a.kappa - b.kappa).abs() < 1e-12);
                prop_assert!(a.kappa <= 1.0);
            }

            #[test]
            fn interpretation_is_total(k in -1e6f64..=1.0) {
                prop_assert!(interpret_kappa(k).is_ok());
            }
        }
    }
}
