//! CSV ingestion and export for corpora, predictions and feature tables.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use essay_audit_core::data::label_sets;
use essay_audit_core::features::{ExternalColumns, FeatureMatrix};
use essay_audit_core::{Attribute, DemographicProfile, EssayRecord, PredictionRecord, ScoreScale, Split, TaskType};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Logical field to CSV column name. Demographic columns may be `null`,
/// in which case every essay gets `unknown` for that attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub essay_id: String,
    pub full_text: String,
    pub prompt_name: String,
    pub task_type: String,
    pub holistic_score: String,
    pub word_count: String,
    pub split: String,
    pub gender: Option<String>,
    pub grade_level: Option<String>,
    pub ell_status: Option<String>,
    pub race_ethnicity: Option<String>,
    pub economic_status: Option<String>,
    pub disability_status: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            essay_id: "essay_id".into(),
            full_text: "full_text".into(),
            prompt_name: "prompt_name".into(),
            task_type: "task_type".into(),
            holistic_score: "holistic_score".into(),
            word_count: "word_count".into(),
            split: "split".into(),
            gender: Some("gender".into()),
            grade_level: Some("grade_level".into()),
            ell_status: Some("ell_status".into()),
            race_ethnicity: Some("race_ethnicity".into()),
            economic_status: Some("economic_status".into()),
            disability_status: Some("disability_status".into()),
        }
    }
}

impl ColumnMapping {
    pub fn demographic(&self, attribute: Attribute) -> Option<&str> {
        match attribute {
            Attribute::Gender => self.gender.as_deref(),
            Attribute::GradeLevel => self.grade_level.as_deref(),
            Attribute::EllStatus => self.ell_status.as_deref(),
            Attribute::RaceEthnicity => self.race_ethnicity.as_deref(),
            Attribute::EconomicStatus => self.economic_status.as_deref(),
            Attribute::DisabilityStatus => self.disability_status.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<EssayRecord>,
    /// Labels seen per demographic attribute, `unknown` included.
    pub label_sets: BTreeMap<Attribute, BTreeSet<String>>,
}

impl Corpus {
    pub fn prompts(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.prompt_name.as_str()).collect()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| AuditError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(false).from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> AuditError {
    AuditError::Csv { path: path.to_path_buf(), message: e.to_string() }
}

fn headers(path: &Path, reader: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let h = reader.headers().map_err(|e| csv_err(path, e))?;
    Ok(h.iter().map(|s| s.trim().to_string()).collect())
}

fn column(path: &Path, header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| AuditError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
}

fn row_error(path: &Path, row: usize, message: impl Into<String>) -> AuditError {
    AuditError::Row { path: path.to_path_buf(), row, message: message.into() }
}

/// Loads a corpus. Rows are numbered from 1 for the first data row (the
/// header is not counted).
pub fn load_corpus(path: &Path, mapping: &ColumnMapping, scale: ScoreScale) -> Result<Corpus> {
    let mut reader = open_reader(path)?;
    let header = headers(path, &mut reader)?;
    if header.iter().all(|h| h.is_empty()) {
        return Err(AuditError::EmptyFile { path: path.to_path_buf() });
    }
    let idx = |name: &str| column(path, &header, name);
    let c_id = idx(&mapping.essay_id)?;
    let c_text = idx(&mapping.full_text)?;
    let c_prompt = idx(&mapping.prompt_name)?;
    let c_task = idx(&mapping.task_type)?;
    let c_score = idx(&mapping.holistic_score)?;
    let c_words = idx(&mapping.word_count)?;
    let c_split = idx(&mapping.split)?;
    let mut c_demo = Vec::new();
    for attr in Attribute::ALL {
        if let Some(name) = mapping.demographic(attr) {
            c_demo.push((attr, idx(name)?));
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| row_error(path, row_no, e.to_string()))?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let essay_id = cell(c_id).trim().to_string();
        if essay_id.is_empty() {
            return Err(row_error(path, row_no, "empty essay_id"));
        }
        let score: i32 = cell(c_score)
            .trim()
            .parse()
            .map_err(|_| row_error(path, row_no, format!("holistic_score {:?} is not an integer", cell(c_score))))?;
        if !scale.contains(score) {
            return Err(row_error(
                path,
                row_no,
                format!("holistic_score {score} outside scale [{}, {}]", scale.min(), scale.max()),
            ));
        }
        let full_text = cell(c_text).to_string();
        if full_text.trim().is_empty() {
            return Err(row_error(path, row_no, "full_text is empty"));
        }
        let word_count: u32 = cell(c_words)
            .trim()
            .parse()
            .map_err(|_| row_error(path, row_no, format!("word_count {:?} is not a non-negative integer", cell(c_words))))?;
        let task_type: TaskType = cell(c_task).parse().map_err(|e| row_error(path, row_no, format!("{e}")))?;
        let split: Split = cell(c_split).parse().map_err(|e| row_error(path, row_no, format!("{e}")))?;
        let mut demographics = DemographicProfile::default();
        for &(attr, c) in &c_demo {
            demographics.set(attr, cell(c));
        }
        if !seen.insert(essay_id.clone()) {
            return Err(AuditError::DuplicateId { path: path.to_path_buf(), row: row_no, essay_id });
        }
        records.push(EssayRecord {
            essay_id,
            full_text,
            prompt_name: cell(c_prompt).trim().to_string(),
            task_type,
            holistic_score: score,
            word_count,
            split,
            demographics,
        });
    }
    if records.is_empty() {
        return Err(AuditError::EmptyFile { path: path.to_path_buf() });
    }
    let label_sets = label_sets(&records);
    Ok(Corpus { records, label_sets })
}

/// Writes records under the mapping's column names; unmapped demographics
/// are omitted.
pub fn write_corpus(path: &Path, records: &[EssayRecord], mapping: &ColumnMapping) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<&str> = vec![
        &mapping.essay_id,
        &mapping.full_text,
        &mapping.prompt_name,
        &mapping.task_type,
        &mapping.holistic_score,
        &mapping.word_count,
        &mapping.split,
    ];
    let demo: Vec<(Attribute, &str)> =
        Attribute::ALL.iter().filter_map(|&a| mapping.demographic(a).map(|n| (a, n))).collect();
    header.extend(demo.iter().map(|(_, n)| *n));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in records {
        let score = r.holistic_score.to_string();
        let words = r.word_count.to_string();
        let mut row: Vec<&str> = vec![
            &r.essay_id,
            &r.full_text,
            &r.prompt_name,
            r.task_type.as_str(),
            &score,
            &words,
            r.split.as_str(),
        ];
        row.extend(demo.iter().map(|(a, _)| r.demographics.get(*a)));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AuditError::io(path, e))
}

/// Loads `essay_id,true_score,predicted_score[,confidence][,rationale]`.
/// A header-only file yields no records.
pub fn load_predictions(path: &Path, scale: ScoreScale) -> Result<Vec<PredictionRecord>> {
    let mut reader = open_reader(path)?;
    let header = headers(path, &mut reader)?;
    let c_id = column(path, &header, "essay_id")?;
    let c_true = column(path, &header, "true_score")?;
    let c_pred = column(path, &header, "predicted_score")?;
    let c_conf = header.iter().position(|h| h == "confidence");
    let c_rat = header.iter().position(|h| h == "rationale");
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| row_error(path, row_no, e.to_string()))?;
        let cell = |c: usize| row.get(c).unwrap_or("").trim();
        let int = |c: usize, what: &str| -> Result<i32> {
            cell(c).parse().map_err(|_| row_error(path, row_no, format!("{what} {:?} is not an integer", cell(c))))
        };
        let mut rec = PredictionRecord::new(cell(c_id), int(c_true, "true_score")?, int(c_pred, "predicted_score")?);
        if let Some(c) = c_conf.filter(|&c| !cell(c).is_empty()) {
            let v: f64 =
                cell(c).parse().map_err(|_| row_error(path, row_no, format!("confidence {:?} is not a number", cell(c))))?;
            rec.confidence = Some(v);
        }
        if let Some(c) = c_rat {
            let raw = row.get(c).unwrap_or("");
            if !raw.is_empty() {
                rec.rationale = Some(raw.to_string());
            }
        }
        rec.validate(&scale).map_err(|e| row_error(path, row_no, e.to_string()))?;
        if !seen.insert(rec.essay_id.clone()) {
            return Err(AuditError::DuplicateId { path: path.to_path_buf(), row: row_no, essay_id: rec.essay_id });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, preds: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["essay_id", "true_score", "predicted_score", "confidence", "rationale"])
        .map_err(|e| csv_err(path, e))?;
    for p in preds {
        let conf = p.confidence.map(|c| c.to_string()).unwrap_or_default();
        w.write_record([
            p.essay_id.as_str(),
            &p.true_score.to_string(),
            &p.predicted_score.to_string(),
            &conf,
            p.rationale.as_deref().unwrap_or(""),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AuditError::io(path, e))
}

/// `essay_id` plus numeric columns.
pub fn load_external_features(path: &Path) -> Result<ExternalColumns> {
    let mut reader = open_reader(path)?;
    let header = headers(path, &mut reader)?;
    let c_id = column(path, &header, "essay_id")?;
    let names: Vec<String> = header.iter().enumerate().filter(|&(i, _)| i != c_id).map(|(_, h)| h.clone()).collect();
    let mut ext = ExternalColumns::new(names);
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| row_error(path, row_no, e.to_string()))?;
        let mut values = Vec::with_capacity(ext.names.len());
        for (c, v) in row.iter().enumerate() {
            if c == c_id {
                continue;
            }
            let x: f64 = v.trim().parse().map_err(|_| row_error(path, row_no, format!("{v:?} is not a number")))?;
            if !x.is_finite() {
                return Err(row_error(path, row_no, format!("non-finite value in column {:?}", header[c])));
            }
            values.push(x);
        }
        let id = row.get(c_id).unwrap_or("").trim().to_string();
        if ext.rows.contains_key(&id) {
            return Err(AuditError::DuplicateId { path: path.to_path_buf(), row: row_no, essay_id: id });
        }
        ext.insert(id, values)?;
    }
    Ok(ext)
}

/// Feature matrix as CSV: `essay_id` then the manifest columns.
pub fn write_feature_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["essay_id".to_string()];
    header.extend(m.columns.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (r, id) in m.essay_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(m.values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AuditError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| AuditError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| AuditError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))
}
