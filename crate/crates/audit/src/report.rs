//! Audit report assembly and rendering.

use std::fmt::Write as _;

use essay_audit_core::ScoreScale;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::{PromptReport, Section};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub scorer: String,
    pub scale: ScoreScale,
    pub prompts: Vec<PromptReport>,
    pub timestamps: Timestamps,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Report JSON with the run timestamps removed, for comparing runs.
pub fn without_timestamps(json: &str) -> serde_json::Result<String> {
    let mut v: Value = serde_json::from_str(json)?;
    if let Value::Object(map) = &mut v {
        map.remove("timestamps");
    }
    serde_json::to_string_pretty(&v)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per prompt: probe kappa against the demographic features.
pub fn table2_csv(prompts: &[PromptReport]) -> String {
    let mut out = String::from("prompt,kappa,interpretation,weighting,evaluated_on,split,train_size,evaluated_size\n");
    for p in prompts {
        match &p.probe {
            Section::Present(r) => {
                let _ = writeln!(
                    out,
                    "{},{:.4},{},{},{},{},{},{}",
                    csv_field(&p.prompt),
                    r.kappa,
                    r.interpretation.label(),
                    serde_json::to_value(r.weighting).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    serde_json::to_value(r.evaluate_on).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    csv_field(&r.split),
                    r.train_size,
                    r.evaluated_size
                );
            }
            Section::Skipped { reason } => {
                let _ = writeln!(out, "{},,skipped: {},,,,,", csv_field(&p.prompt), csv_field(reason));
            }
        }
    }
    out
}

/// Equalized-odds gap per prompt and score class for one attribute.
/// Empty cells are classes where a gap is undefined.
pub fn table3_csv(prompts: &[PromptReport], attribute: &str, scale: ScoreScale) -> String {
    let mut out = String::from("prompt");
    for s in scale.scores() {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for p in prompts {
        let table = p
            .fairness
            .present()
            .and_then(|f| f.attributes.get(attribute))
            .and_then(Section::present)
            .and_then(|a| a.odds.present());
        let Some(t) = table else { continue };
        out.push_str(&csv_field(&p.prompt));
        for e in &t.entries {
            match e.eo_gap {
                Some(g) => {
                    let _ = write!(out, ",{g:.4}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn skipped_line(out: &mut String, what: &str, reason: &str) {
    let _ = writeln!(out, "- {what}: skipped ({reason})");
}

pub fn markdown_summary(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Essay scoring audit\n");
    let _ = writeln!(out, "- tool version: {}", report.tool_version);
    let _ = writeln!(out, "- command: {}", report.command);
    let _ = writeln!(out, "- scorer: {}", report.scorer);
    let _ = writeln!(out, "- config hash: `{}`", report.config_hash);
    let _ = writeln!(out, "- seed: {}", report.seed);
    let _ = writeln!(out, "- started: {}, finished: {}", report.timestamps.started, report.timestamps.finished);
    for p in &report.prompts {
        let _ = writeln!(out, "\n## {}\n", p.prompt);
        let _ = writeln!(out, "- essays: {}", p.n_essays);
        match &p.scoring {
            Section::Present(s) => {
                let _ = writeln!(out, "- predictions: {} ({} failed)", s.n_predictions, s.n_failures);
                for n in &s.notes {
                    let _ = writeln!(out, "- note: {n}");
                }
            }
            Section::Skipped { reason } => skipped_line(&mut out, "scoring", reason),
        }
        match &p.accuracy {
            Section::Present(a) => {
                let _ = writeln!(
                    out,
                    "- QWK: {:.4} ({}){}",
                    a.kappa.kappa,
                    a.interpretation.label(),
                    if a.kappa.degenerate { ", degenerate" } else { "" }
                );
                let recalls: Vec<String> = report
                    .scale
                    .scores()
                    .map(|s| format!("{s}: {}", fmt_opt(a.edge.recall(s))))
                    .collect();
                let _ = writeln!(out, "- recall by score: {}", recalls.join(", "));
                let _ = writeln!(out, "- within-one accuracy: {:.3}", a.edge.within_one_accuracy);
            }
            Section::Skipped { reason } => skipped_line(&mut out, "accuracy", reason),
        }
        match &p.fairness {
            Section::Present(f) => {
                let _ = writeln!(out, "\n| attribute | max EO gap | OSA R² (p) | OSD R² (p) |\n|---|---|---|---|");
                for (name, sec) in &f.attributes {
                    match sec {
                        Section::Present(a) => {
                            let max_gap = a.odds.present().and_then(|t| {
                                t.entries.iter().filter_map(|e| e.eo_gap).fold(None, |m: Option<f64>, g| {
                                    Some(m.map_or(g, |m| m.max(g)))
                                })
                            });
                            let reg = |s: &Section<essay_audit_core::fairness::RegressionFairnessResult>| match s {
                                Section::Present(r) => format!("{:.4} ({:.3})", r.r_squared, r.permutation_p_value),
                                Section::Skipped { .. } => "skipped".to_string(),
                            };
                            let _ = writeln!(out, "| {name} | {} | {} | {} |", fmt_opt(max_gap), reg(&a.osa), reg(&a.osd));
                        }
                        Section::Skipped { reason } => {
                            let _ = writeln!(out, "| {name} | skipped: {reason} | | |");
                        }
                    }
                }
                out.push('\n');
            }
            Section::Skipped { reason } => skipped_line(&mut out, "fairness", reason),
        }
        match &p.probe {
            Section::Present(r) => {
                let _ = writeln!(out, "- demographic probe kappa: {:.4} ({})", r.kappa, r.interpretation.label());
            }
            Section::Skipped { reason } => skipped_line(&mut out, "probe", reason),
        }
        match &p.explain {
            Section::Present(e) => {
                let top: Vec<String> = e
                    .importance
                    .ranked()
                    .into_iter()
                    .take(5)
                    .map(|f| format!("{} ({:.4})", f.feature, f.mean_drop))
                    .collect();
                let _ = writeln!(out, "- top features by importance: {}", top.join(", "));
            }
            Section::Skipped { reason } => skipped_line(&mut out, "explain", reason),
        }
    }
    out
}
