//! Command line: `essay-audit <command> --config <path> [--prompt <name>] [--out <dir>] [--seed <n>]`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, RunConfig};
use crate::error::{AuditError, Result};
use crate::io::{write_feature_matrix, write_predictions, write_text};
use crate::pipeline::{run_prompts, Context, PromptRun, Section, Sections};
use crate::report::{markdown_summary, now, table2_csv, table3_csv, AuditReport, Timestamps};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "essay-audit", version, about = "Score essays and audit scorers for accuracy, fairness and bias")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict the run to one prompt.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and list every violation.
    Validate(CommonArgs),
    /// Score essays and write one predictions file per prompt.
    Score(CommonArgs),
    /// Agreement with human scores: QWK, confusion matrix, edge recalls.
    Evaluate(CommonArgs),
    /// Equalized odds and regression-based disparity per attribute.
    Fairness(CommonArgs),
    /// Predict human scores from demographics alone.
    Probe(CommonArgs),
    /// Feature importance and per-essay explanations.
    Explain(CommonArgs),
    /// Every section, as JSON and Markdown.
    Report(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Score(_) => "score",
            Command::Evaluate(_) => "evaluate",
            Command::Fairness(_) => "fairness",
            Command::Probe(_) => "probe",
            Command::Explain(_) => "explain",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Validate(a)
            | Command::Score(a)
            | Command::Evaluate(a)
            | Command::Fairness(a)
            | Command::Probe(a)
            | Command::Explain(a)
            | Command::Report(a) => a,
        }
    }

    fn sections(&self) -> Sections {
        let none = Sections::default();
        match self {
            Command::Validate(_) => none,
            Command::Score(_) => Sections { score: true, ..none },
            Command::Evaluate(_) => Sections { accuracy: true, ..none },
            Command::Fairness(_) => Sections { fairness: true, ..none },
            Command::Probe(_) => Sections { probe: true, ..none },
            Command::Explain(_) => Sections { explain: true, ..none },
            Command::Report(_) => Sections::ALL,
        }
    }
}

/// File-name form of a prompt: lowercase alphanumerics, everything else `-`.
pub fn slug(prompt: &str) -> String {
    prompt.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

/// Loads the config and applies command-line overrides.
pub fn prepare_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.raw.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.raw.output_dir = std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone());
    }
    Ok(cfg)
}

/// What a finished command produced.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Option<AuditReport>,
    pub written: Vec<PathBuf>,
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    write_text(&p, text)?;
    written.push(p);
    Ok(())
}

fn exit_code(runs: &BTreeMap<String, PromptRun>, sections: Sections) -> i32 {
    let scoring_requested = sections.score || sections.accuracy || sections.fairness || sections.explain;
    let mut code = EXIT_OK;
    for run in runs.values() {
        let r = &run.report;
        match &r.scoring {
            Section::Skipped { .. } if scoring_requested => return EXIT_FATAL,
            Section::Present(s) if s.n_failures > 0 => code = EXIT_PARTIAL,
            _ => {}
        }
        if sections.probe && sections == (Sections { probe: true, ..Sections::default() }) && r.probe.present().is_none() {
            return EXIT_FATAL;
        }
    }
    code
}

/// Runs a subcommand against an already prepared context.
pub fn execute(command: &Command, ctx: &Context) -> Result<Outcome> {
    let started = now();
    let sections = command.sections();
    let runs = run_prompts(ctx, sections)?;
    let dir = ctx.config.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| AuditError::io(&dir, e))?;
    let mut written = Vec::new();
    let scale = ctx.scale();

    for (prompt, run) in &runs {
        let s = slug(prompt);
        if let Some(o) = &run.outcome {
            if sections.score {
                let p = dir.join(format!("predictions_{s}.csv"));
                write_predictions(&p, &o.predictions)?;
                written.push(p);
                if let Some(g) = &o.gbm {
                    let p = dir.join(format!("features_{s}.csv"));
                    write_feature_matrix(&p, &g.test)?;
                    written.push(p);
                }
            }
        }
        if let Section::Present(a) = &run.report.accuracy {
            write(&dir, &format!("confusion_{s}.csv"), &a.confusion.to_csv(), &mut written)?;
        }
        if let Section::Present(e) = &run.report.explain {
            write(&dir, &format!("importance_{s}.csv"), &e.importance.to_csv(), &mut written)?;
        }
    }
    let prompts: Vec<_> = runs.values().map(|r| r.report.clone()).collect();
    if sections.probe {
        write(&dir, "table2.csv", &table2_csv(&prompts), &mut written)?;
    }
    if sections.fairness {
        for a in &ctx.config.fairness_attributes {
            write(&dir, &format!("table3_{}.csv", a.name()), &table3_csv(&prompts, a.name(), scale), &mut written)?;
        }
    }
    let exit_code = exit_code(&runs, sections);
    let report = AuditReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        config_hash: ctx.config.hash.clone(),
        seed: ctx.config.seed(),
        scorer: ctx.config.scorer.name().to_string(),
        scale,
        prompts,
        timestamps: Timestamps { started, finished: now() },
    };
    let json_name = if sections == Sections::ALL { "report.json".to_string() } else { format!("{}.json", command.name()) };
    write(&dir, &json_name, &report.to_json(), &mut written)?;
    if sections == Sections::ALL {
        write(&dir, "summary.md", &markdown_summary(&report), &mut written)?;
    }
    Ok(Outcome { exit_code, report: Some(report), written })
}

fn error_code(e: &AuditError) -> i32 {
    match e {
        AuditError::Validation(_) => EXIT_INVALID,
        _ => EXIT_FATAL,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INVALID;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let cfg = match prepare_config(cli.command.args()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return error_code(&e);
        }
    };
    if let Command::Validate(_) = cli.command {
        let _ = writeln!(out, "ok");
        return EXIT_OK;
    }
    let mut ctx = match Context::load(cfg) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return error_code(&e);
        }
    };
    ctx.prompt_filter = cli.command.args().prompt.clone();
    match execute(&cli.command, &ctx) {
        Ok(o) => {
            for p in &o.written {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            if let Some(r) = &o.report {
                for p in &r.prompts {
                    if let Section::Present(s) = &p.scoring {
                        for f in &s.failures {
                            let _ = writeln!(err, "warning: {}: essay {} failed: {}", p.prompt, f.essay_id, f.errors.join("; "));
                        }
                    }
                    if let Section::Skipped { reason } = &p.scoring {
                        if o.exit_code == EXIT_FATAL {
                            let _ = writeln!(err, "error: {}: {reason}", p.prompt);
                        }
                    }
                }
            }
            o.exit_code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            error_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Phones and driving"), "phones-and-driving");
        assert_eq!(slug("Car-free cities"), "car-free-cities");
    }

    #[test]
    fn bad_arguments_are_validation_failures() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["essay-audit", "score"], &mut o, &mut e), EXIT_INVALID);
        assert_eq!(run(["essay-audit", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
