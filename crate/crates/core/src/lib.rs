//! Scoring and auditing primitives for automated essay scoring.
//!
//! Everything here is pure computation over in-memory data and builds
//! without `std`; file formats, HTTP and the command line live in the
//! `essay-audit` crate.

#![no_std]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod data;
pub mod boosting;
pub mod error;
pub mod explain;
pub mod fairness;
pub mod features;
pub mod linalg;
pub mod llm;
pub mod metrics;
pub mod probe;

pub use data::{
    partition_by, Attribute, DemographicProfile, EssayRecord, GroupPartition, PredictionRecord,
    ScoreScale, Split, TaskType, UNKNOWN,
};
pub use error::{Error, Result};
pub use metrics::{
    build_confusion_matrix, edge_robustness, interpret_kappa, quadratic_weighted_kappa, Concordance,
    ConfusionMatrix, EdgeReport, KappaResult,
};
