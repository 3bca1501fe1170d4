use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Rows beyond this count are subsampled (seeded) before computing cut points.
pub const BINNING_SUBSAMPLE: usize = 200_000;

/// Per-feature quantile cut points. A value `x` falls into bin
/// `#{t in thresholds : t < x}`; missing values (NaN) go to `missing_bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMap {
    pub thresholds: Vec<Vec<f64>>,
    pub missing_bin: u16,
}

impl BinMap {
    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    /// Number of value bins of a feature, excluding the missing bin.
    pub fn value_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        if value.is_nan() {
            return self.missing_bin;
        }
        self.thresholds[feature].partition_point(|&t| t < value) as u16
    }

    /// Bins every cell of `x`; infinite values are rejected.
    pub fn transform(&self, x: &Matrix) -> Result<BinnedMatrix> {
        if x.cols != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), actual: x.cols });
        }
        let mut data = vec![0u16; x.rows * x.cols];
        for r in 0..x.rows {
            for f in 0..x.cols {
                let v = x.get(r, f);
                if v.is_infinite() {
                    return Err(Error::NonFinite { row: r, column: f });
                }
                data[f * x.rows + r] = self.bin(f, v);
            }
        }
        Ok(BinnedMatrix { rows: x.rows, cols: x.cols, data })
    }
}

/// Column-major bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u16>,
}

impl BinnedMatrix {
    #[inline]
    pub fn column(&self, feature: usize) -> &[u16] {
        &self.data[feature * self.rows..(feature + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> u16 {
        self.data[feature * self.rows + row]
    }
}

/// Cut points for one feature from its non-missing sample values.
///
/// With at most `n_bins` distinct values the cuts are the midpoints between
/// consecutive distinct values; otherwise they are the `k / n_bins`
/// quantiles (linear interpolation between order statistics), deduplicated.
pub fn cut_points(values: &mut [f64], n_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct = values.to_vec();
    distinct.dedup();
    let mut cuts = Vec::new();
    if distinct.len() <= 1 {
        return cuts;
    }
    if distinct.len() <= n_bins {
        for w in distinct.windows(2) {
            cuts.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    } else {
        let m = values.len();
        for k in 1..n_bins {
            let pos = (k as f64 / n_bins as f64) * (m - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(m - 1);
            let frac = pos - lo as f64;
            cuts.push(values[lo] + (values[hi] - values[lo]) * frac);
        }
    }
    cuts.dedup();
    // Cuts at or above the maximum would leave an empty top bin.
    let max = *distinct.last().expect("non-empty");
    cuts.retain(|&c| c < max);
    cuts
}

/// Learns a [`BinMap`] from training data and bins it.
pub fn bin_features(x: &Matrix, n_bins: usize, seed: u64) -> Result<(BinMap, BinnedMatrix)> {
    if x.rows == 0 || x.cols == 0 {
        return Err(Error::EmptyInput("feature matrix is empty"));
    }
    if !(2..=256).contains(&n_bins) {
        return Err(Error::InvalidConfig(alloc::format!("n_bins {n_bins} outside [2, 256]")));
    }
    let rows: Vec<usize> = if x.rows > BINNING_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, x.rows, BINNING_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..x.rows).collect()
    };
    let mut thresholds = Vec::with_capacity(x.cols);
    let mut buf = Vec::with_capacity(rows.len());
    for f in 0..x.cols {
        buf.clear();
        for &r in &rows {
            let v = x.get(r, f);
            if v.is_infinite() {
                return Err(Error::NonFinite { row: r, column: f });
            }
            if !v.is_nan() {
                buf.push(v);
            }
        }
        thresholds.push(cut_points(&mut buf, n_bins));
    }
    let map = BinMap { thresholds, missing_bin: n_bins as u16 };
    let binned = map.transform(x)?;
    Ok((map, binned))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn column(values: &[f64]) -> Matrix {
        Matrix { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    #[test]
    fn distinct_values_map_bijectively() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut vals: Vec<f64> = (0..256).map(|i| i as f64 / 256.0 + rng.random::<f64>() * 1e-4).collect();
        use rand::seq::SliceRandom;
        vals.shuffle(&mut rng);
        let (map, binned) = bin_features(&column(&vals), 256, 0).unwrap();
        assert_eq!(map.thresholds[0].len(), 255);
        let mut seen: Vec<u16> = binned.column(0).to_vec();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 256);
    }

    #[test]
    fn constant_feature_has_one_bin() {
        let (map, binned) = bin_features(&column(&[4.0; 30]), 256, 0).unwrap();
        assert!(map.thresholds[0].is_empty());
        assert!(binned.column(0).iter().all(|&b| b == 0));
    }

    #[test]
    fn missing_values_get_their_own_bin() {
        let (map, binned) = bin_features(&column(&[1.0, f64::NAN, 2.0]), 16, 0).unwrap();
        assert_eq!(binned.column(0), &[0, 16, 1]);
        assert_eq!(map.bin(0, f64::NAN), 16);
    }

    #[test]
    fn infinite_rejected() {
        assert!(matches!(
            bin_features(&column(&[1.0, f64::INFINITY]), 16, 0),
            Err(Error::NonFinite { row: 1, column: 0 })
        ));
        assert!(bin_features(&Matrix::zeros(0, 3), 16, 0).is_err());
    }

    /// Quantile cuts recomputed by sorting and picking order statistics.
    #[test]
    fn skewed_sample_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<f64> = (0..5000).map(|_| libm::exp(rng.random::<f64>() * 6.0)).collect();
        let n_bins = 32;
        let (map, _) = bin_features(&column(&vals), n_bins, 0).unwrap();

        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut oracle: Vec<f64> = Vec::new();
        for k in 1..n_bins {
            let pos = k as f64 * (sorted.len() - 1) as f64 / n_bins as f64;
            let i = pos as usize;
            let t = pos - i as f64;
            let q = sorted[i] * (1.0 - t) + sorted[i + 1] * t;
            if oracle.last() != Some(&q) {
                oracle.push(q);
            }
        }
        assert_eq!(map.thresholds[0].len(), oracle.len());
        for (a, b) in map.thresholds[0].iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn bins_respect_thresholds() {
        let vals: Vec<f64> = (0..1000).map(|i| (i % 37) as f64 * 0.5).collect();
        let (map, binned) = bin_features(&column(&vals), 8, 0).unwrap();
        let t = &map.thresholds[0];
        for (r, &v) in vals.iter().enumerate() {
            let b = binned.get(r, 0) as usize;
            if b < t.len() {
                assert!(v <= t[b]);
            }
            if b > 0 {
                assert!(v > t[b - 1]);
            }
        }
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }
}
