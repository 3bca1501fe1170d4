use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::readability::{readability, ReadabilityScores};
use super::text::{analyze_text, FamiliarWords};
use super::tfidf::TfidfModel;
use crate::data::EssayRecord;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Text statistics placed in the matrix ahead of the readability block.
pub const STATS_COLUMNS: [&str; 4] = ["sentence_count", "syllable_count", "complex_word_count", "difficult_word_count"];

/// Precomputed numeric columns keyed by essay id (embeddings and the like).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalColumns {
    pub names: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl ExternalColumns {
    pub fn new(names: Vec<String>) -> Self {
        ExternalColumns { names, rows: BTreeMap::new() }
    }

    pub fn insert(&mut self, essay_id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::DimensionMismatch { expected: self.names.len(), actual: values.len() });
        }
        self.rows.insert(essay_id.into(), values);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// Row `i` belongs to `essay_ids[i]`.
    pub essay_ids: Vec<String>,
    /// Column manifest.
    pub columns: Vec<String>,
    pub values: Matrix,
    pub warnings: Vec<String>,
}

impl FeatureMatrix {
    pub fn row_of(&self, essay_id: &str) -> Option<&[f64]> {
        self.essay_ids.iter().position(|e| e == essay_id).map(|i| self.values.row(i))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureSources<'a> {
    pub familiar_words: Option<&'a FamiliarWords>,
    pub tfidf: Option<&'a TfidfModel>,
    pub external: Option<&'a ExternalColumns>,
}

/// Leading integer of a grade label ("10", "grade 9" -> 9); 0 when absent.
pub fn grade_value(label: &str) -> f64 {
    let digits: String =
        label.chars().skip_while(|c| !c.is_ascii_digit()).take_while(char::is_ascii_digit).collect();
    digits.parse::<u32>().map_or(0.0, f64::from)
}

pub fn feature_names(sources: &FeatureSources<'_>) -> Vec<String> {
    let mut names: Vec<String> = STATS_COLUMNS.iter().map(|s| s.to_string()).collect();
    names.extend(ReadabilityScores::NAMES.iter().map(|s| s.to_string()));
    names.push("grade_level".to_string());
    names.push("word_count".to_string());
    if let Some(t) = sources.tfidf {
        names.extend(t.terms.iter().map(|term| format!("tfidf:{term}")));
    }
    if let Some(e) = sources.external {
        names.extend(e.names.iter().map(|n| format!("ext:{n}")));
    }
    names
}

/// One row per essay in input order: stats, readability, grade level, word
/// count, tf-idf block, external block.
pub fn build_feature_matrix(essays: &[EssayRecord], sources: &FeatureSources<'_>) -> Result<FeatureMatrix> {
    if essays.is_empty() {
        return Err(Error::EmptyInput("no essays for the feature matrix"));
    }
    let columns = feature_names(sources);
    let mut values = Matrix::zeros(essays.len(), columns.len());
    let mut warnings = Vec::new();
    if sources.familiar_words.is_none() {
        warnings.push("no familiar-word list; difficult words counted as 3+ syllables".to_string());
    }
    for (r, essay) in essays.iter().enumerate() {
        let wrap = |e: Error| Error::Essay { essay_id: essay.essay_id.clone(), source: Box::new(e) };
        let stats = analyze_text(&essay.full_text, sources.familiar_words).map_err(wrap)?;
        let read = readability(&stats).map_err(wrap)?;
        let mut row: Vec<f64> = Vec::with_capacity(columns.len());
        row.extend([
            stats.sentence_count as f64,
            stats.syllable_count as f64,
            stats.complex_word_count as f64,
            stats.difficult_word_count as f64,
        ]);
        row.extend(read.values());
        row.push(grade_value(&essay.demographics.grade_level));
        row.push(f64::from(essay.word_count));
        if let Some(t) = sources.tfidf {
            row.extend(t.transform_dense(&essay.full_text));
        }
        if let Some(ext) = sources.external {
            let vals = ext.rows.get(&essay.essay_id).ok_or_else(|| Error::MissingEssay(essay.essay_id.clone()))?;
            row.extend_from_slice(vals);
        }
        for (c, v) in row.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, column: c });
            }
            values.set(r, c, v);
        }
    }
    Ok(FeatureMatrix { essay_ids: essays.iter().map(|e| e.essay_id.clone()).collect(), columns, values, warnings })
}
