//! Handcrafted essay features: text statistics, readability indices,
//! TF-IDF and externally supplied numeric columns.

mod matrix;
mod readability;
mod text;
mod tfidf;

pub use matrix::{
    build_feature_matrix, feature_names, grade_value, ExternalColumns, FeatureMatrix, FeatureSources, STATS_COLUMNS,
};
pub use readability::{readability, ReadabilityScores};
pub use text::{analyze_text, count_syllables, words, FamiliarWords, TextStats};
pub use tfidf::{tokenize, SparseRow, TfidfConfig, TfidfModel};
