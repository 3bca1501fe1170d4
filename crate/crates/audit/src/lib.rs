//! Auditing toolkit for automated essay scorers: data IO, scorer
//! clients, the per-prompt pipeline, reports and the command line.

pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{AuditError, Result};
