//! Shared data model: score scales, essays, predictions and demographic
//! partitions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker used for demographic values that were blank or explicitly unknown.
pub const UNKNOWN: &str = "unknown";

/// Contiguous integer score range `[min_score, max_score]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawScale", into = "RawScale")]
pub struct ScoreScale {
    min_score: i32,
    max_score: i32,
}

#[derive(Serialize, Deserialize)]
struct RawScale {
    min: i32,
    max: i32,
}

impl TryFrom<RawScale> for ScoreScale {
    type Error = Error;
    fn try_from(raw: RawScale) -> Result<Self> {
        ScoreScale::new(raw.min, raw.max)
    }
}

impl From<ScoreScale> for RawScale {
    fn from(s: ScoreScale) -> Self {
        RawScale { min: s.min_score, max: s.max_score }
    }
}

impl ScoreScale {
    pub fn new(min_score: i32, max_score: i32) -> Result<Self> {
        if min_score >= max_score {
            return Err(Error::InvalidScale { min: min_score, max: max_score });
        }
        Ok(ScoreScale { min_score, max_score })
    }

    pub fn min(&self) -> i32 {
        self.min_score
    }

    pub fn max(&self) -> i32 {
        self.max_score
    }

    /// Number of categories on the scale.
    pub fn len(&self) -> usize {
        (self.max_score - self.min_score + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, score: i32) -> bool {
        (self.min_score..=self.max_score).contains(&score)
    }

    pub fn check(&self, score: i32) -> Result<i32> {
        if self.contains(score) {
            Ok(score)
        } else {
            Err(Error::ScoreOutOfScale { score, min: self.min_score, max: self.max_score })
        }
    }

    /// Zero-based category index of a score on this scale.
    pub fn index(&self, score: i32) -> Result<usize> {
        self.check(score).map(|s| (s - self.min_score) as usize)
    }

    pub fn score_at(&self, index: usize) -> i32 {
        self.min_score + index as i32
    }

    pub fn scores(&self) -> impl Iterator<Item = i32> {
        self.min_score..=self.max_score
    }

    /// Rounds half away from zero, then clips into the scale.
    pub fn round_clip(&self, value: f64) -> i32 {
        let rounded = libm::round(value);
        if rounded.is_nan() {
            return self.min_score;
        }
        let clipped = rounded.clamp(self.min_score as f64, self.max_score as f64);
        clipped as i32
    }
}

/// Demographic attributes carried by each essay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    GradeLevel,
    EllStatus,
    RaceEthnicity,
    EconomicStatus,
    DisabilityStatus,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Gender,
        Attribute::GradeLevel,
        Attribute::EllStatus,
        Attribute::RaceEthnicity,
        Attribute::EconomicStatus,
        Attribute::DisabilityStatus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::GradeLevel => "grade_level",
            Attribute::EllStatus => "ell_status",
            Attribute::RaceEthnicity => "race_ethnicity",
            Attribute::EconomicStatus => "economic_status",
            Attribute::DisabilityStatus => "disability_status",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown demographic attribute {s:?}")))
    }
}

/// Normalizes a raw demographic cell: blank and "unknown" (any case) become [`UNKNOWN`].
pub fn normalize_label(raw: &str) -> String {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case(UNKNOWN) {
        UNKNOWN.to_string()
    } else {
        trimmed.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemographicProfile {
    pub gender: String,
    pub grade_level: String,
    pub ell_status: String,
    pub race_ethnicity: String,
    pub economic_status: String,
    pub disability_status: String,
}

impl Default for DemographicProfile {
    fn default() -> Self {
        DemographicProfile {
            gender: UNKNOWN.to_string(),
            grade_level: UNKNOWN.to_string(),
            ell_status: UNKNOWN.to_string(),
            race_ethnicity: UNKNOWN.to_string(),
            economic_status: UNKNOWN.to_string(),
            disability_status: UNKNOWN.to_string(),
        }
    }
}

impl DemographicProfile {
    pub fn get(&self, attribute: Attribute) -> &str {
        match attribute {
            Attribute::Gender => &self.gender,
            Attribute::GradeLevel => &self.grade_level,
            Attribute::EllStatus => &self.ell_status,
            Attribute::RaceEthnicity => &self.race_ethnicity,
            Attribute::EconomicStatus => &self.economic_status,
            Attribute::DisabilityStatus => &self.disability_status,
        }
    }

    pub fn set(&mut self, attribute: Attribute, raw: &str) {
        let value = normalize_label(raw);
        match attribute {
            Attribute::Gender => self.gender = value,
            Attribute::GradeLevel => self.grade_level = value,
            Attribute::EllStatus => self.ell_status = value,
            Attribute::RaceEthnicity => self.race_ethnicity = value,
            Attribute::EconomicStatus => self.economic_status = value,
            Attribute::DisabilityStatus => self.disability_status = value,
        }
    }

    pub fn is_known(&self, attribute: Attribute) -> bool {
        self.get(attribute) != UNKNOWN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    Independent,
    SourceBased,
}

impl TaskType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskType::Independent => "independent",
            TaskType::SourceBased => "source-based",
        }
    }
}

impl FromStr for TaskType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "independent" => Ok(TaskType::Independent),
            "sourcebased" | "textdependent" => Ok(TaskType::SourceBased),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown task type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "test" | "testing" => Ok(Split::Test),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown split label {s:?}"))),
        }
    }
}

/// One essay of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssayRecord {
    pub essay_id: String,
    pub full_text: String,
    pub prompt_name: String,
    pub task_type: TaskType,
    pub holistic_score: i32,
    pub word_count: u32,
    pub split: Split,
    pub demographics: DemographicProfile,
}

/// True and predicted score for one essay; the input of every audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub essay_id: String,
    pub true_score: i32,
    pub predicted_score: i32,
    pub confidence: Option<f64>,
    pub rationale: Option<String>,
}

impl PredictionRecord {
    pub fn new(essay_id: impl Into<String>, true_score: i32, predicted_score: i32) -> Self {
        PredictionRecord {
            essay_id: essay_id.into(),
            true_score,
            predicted_score,
            confidence: None,
            rationale: None,
        }
    }

    /// Checks scale membership of both scores and the confidence range.
    pub fn validate(&self, scale: &ScoreScale) -> Result<()> {
        scale.check(self.true_score)?;
        scale.check(self.predicted_score)?;
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "confidence {c} for essay {:?} outside [0, 1]",
                    self.essay_id
                )));
            }
        }
        Ok(())
    }
}

/// Essay-to-group assignment for one demographic attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub attribute: Attribute,
    pub assignment: BTreeMap<String, String>,
    /// Essays left out because their label was unknown.
    pub excluded: BTreeSet<String>,
}

impl GroupPartition {
    /// Distinct group labels in lexicographic order.
    pub fn groups(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.assignment.values().map(String::as_str).collect();
        set.into_iter().collect()
    }

    pub fn group_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for label in self.assignment.values() {
            *sizes.entry(label.as_str()).or_insert(0) += 1;
        }
        sizes
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.len()
    }

    pub fn group_of(&self, essay_id: &str) -> Option<&str> {
        self.assignment.get(essay_id).map(String::as_str)
    }
}

/// Groups essays by one demographic attribute, excluding unknown labels.
pub fn partition_by(records: &[EssayRecord], attribute: Attribute) -> Result<GroupPartition> {
    let mut assignment = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for r in records {
        if r.demographics.is_known(attribute) {
            assignment.insert(r.essay_id.clone(), r.demographics.get(attribute).to_string());
        } else {
            excluded.insert(r.essay_id.clone());
        }
    }
    let partition = GroupPartition { attribute, assignment, excluded };
    if partition.groups().len() < 2 {
        return Err(Error::DegeneratePartition { attribute: attribute.name().to_string() });
    }
    Ok(partition)
}

/// Sorted label set observed for each attribute, unknowns included.
pub fn label_sets(records: &[EssayRecord]) -> BTreeMap<Attribute, BTreeSet<String>> {
    let mut out: BTreeMap<Attribute, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        for a in Attribute::ALL {
            out.entry(a).or_default().insert(r.demographics.get(a).to_string());
        }
    }
    out
}
