use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub lowercase: bool,
    pub min_df: usize,
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig { lowercase: true, min_df: 2, max_features: 5000 }
    }
}

/// Sparse row: `(column, weight)` pairs in ascending column order.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub config: TfidfConfig,
    /// Terms in column order (alphabetical).
    pub terms: Vec<String>,
    pub document_frequency: Vec<usize>,
    pub idf: Vec<f64>,
    pub n_documents: usize,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Alphabetic runs, optionally lowercased.
pub fn tokenize(text: &str, lowercase: bool) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic()).filter(|t| !t.is_empty()).map(move |t| {
        if lowercase {
            t.to_lowercase()
        } else {
            String::from(t)
        }
    })
}

fn term_counts(text: &str, lowercase: bool) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in tokenize(text, lowercase) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

impl TfidfModel {
    /// Learns vocabulary and smoothed idf, `ln((1 + D) / (1 + df)) + 1`.
    ///
    /// Terms below `min_df` documents are dropped; if more than
    /// `max_features` remain, the most frequent over the corpus are kept
    /// (ties broken alphabetically).
    pub fn fit<S: AsRef<str>>(docs: &[S], config: TfidfConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyInput("tf-idf corpus"));
        }
        if config.max_features == 0 {
            return Err(Error::InvalidConfig(String::from("max_features must be positive")));
        }
        let mut df: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for doc in docs {
            for (term, count) in term_counts(doc.as_ref(), config.lowercase) {
                let e = df.entry(term).or_insert((0, 0));
                e.0 += 1;
                e.1 += count;
            }
        }
        let mut kept: Vec<(String, usize, usize)> =
            df.into_iter().filter(|(_, (d, _))| *d >= config.min_df.max(1)).map(|(t, (d, c))| (t, d, c)).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if kept.len() > config.max_features {
            kept.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(config.max_features);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let n = docs.len() as f64;
        let mut model = TfidfModel {
            config,
            terms: Vec::with_capacity(kept.len()),
            document_frequency: Vec::with_capacity(kept.len()),
            idf: Vec::with_capacity(kept.len()),
            n_documents: docs.len(),
            index: BTreeMap::new(),
        };
        for (term, d, _) in kept {
            model.idf.push(libm::log((1.0 + n) / (1.0 + d as f64)) + 1.0);
            model.document_frequency.push(d);
            model.terms.push(term);
        }
        model.rebuild_index();
        Ok(model)
    }

    /// Restores the term lookup after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        if self.index.is_empty() && !self.terms.is_empty() {
            return self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok();
        }
        self.index.get(term).copied()
    }

    /// Raw term count times idf, L2-normalized. Unseen terms are ignored, so
    /// a document with no known terms maps to an empty row.
    pub fn transform(&self, text: &str) -> SparseRow {
        let mut row: SparseRow = term_counts(text, self.config.lowercase)
            .into_iter()
            .filter_map(|(t, c)| self.column(&t).map(|j| (j, c as f64 * self.idf[j])))
            .collect();
        row.sort_by_key(|&(j, _)| j);
        let norm = libm::sqrt(row.iter().map(|(_, w)| w * w).sum::<f64>());
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
        row
    }

    pub fn transform_dense(&self, text: &str) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len()];
        for (j, w) in self.transform(text) {
            out[j] = w;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(min_df: usize) -> TfidfConfig {
        TfidfConfig { min_df, ..TfidfConfig::default() }
    }

    fn weight(row: &SparseRow, model: &TfidfModel, term: &str) -> f64 {
        let j = model.column(term).unwrap();
        row.iter().find(|(c, _)| *c == j).map_or(0.0, |(_, w)| *w)
    }

    /// idf(the) = ln(3/3) + 1 = 1, idf(cat) = idf(dog) = ln(3/2) + 1.
    /// doc1 = (1, i) / sqrt(1 + i^2); doc2 = (1, 2i) / sqrt(1 + 4 i^2).
    #[test]
    fn toy_corpus_by_hand() {
        let m = TfidfModel::fit(&["The cat", "the dog dog"], cfg(1)).unwrap();
        assert_eq!(m.terms, ["cat", "dog", "the"]);
        assert_eq!(m.idf[2], 1.0);
        assert!((m.idf[0] - 1.4054651081081644).abs() < 1e-15);
        let r1 = m.transform("The cat");
        assert!((weight(&r1, &m, "the") - 0.5797386715376657).abs() < 1e-12);
        assert!((weight(&r1, &m, "cat") - 0.8148024746671689).abs() < 1e-12);
        let r2 = m.transform("the dog dog");
        assert!((weight(&r2, &m, "the") - 0.33517574332792605).abs() < 1e-12);
        assert!((weight(&r2, &m, "dog") - 0.9421556246632359).abs() < 1e-12);
        assert_eq!(weight(&r2, &m, "cat"), 0.0);
    }

    #[test]
    fn unseen_terms_give_empty_row() {
        let m = TfidfModel::fit(&["a b", "a b c"], TfidfConfig::default()).unwrap();
        assert_eq!(m.terms, ["a", "b"]);
        assert!(m.transform("zebra quokka").is_empty());
        assert_eq!(m.transform_dense("zebra"), [0.0, 0.0]);
    }

    #[test]
    fn min_df_can_empty_the_vocabulary() {
        assert_eq!(TfidfModel::fit(&["one", "two"], cfg(2)), Err(Error::EmptyVocabulary));
        let empty: [&str; 0] = [];
        assert!(matches!(TfidfModel::fit(&empty, cfg(1)), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn max_features_keeps_most_frequent() {
        let docs = ["x x x y z", "x y y w", "z w"];
        let m = TfidfModel::fit(&docs, TfidfConfig { max_features: 2, ..cfg(1) }).unwrap();
        // counts: x 4, y 3, z 2, w 2
        assert_eq!(m.terms, ["x", "y"]);
    }

    #[test]
    fn survives_serde_without_index() {
        let m = TfidfModel::fit(&["a b", "a b c", "c a"], TfidfConfig::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: TfidfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.transform("a c c"), m.transform("a c c"));
    }
}
