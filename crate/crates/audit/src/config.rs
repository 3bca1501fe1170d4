//! Run configuration: one JSON document per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use essay_audit_core::boosting::GbmConfig;
use essay_audit_core::explain::{ImportanceMetric, SurrogateOptions};
use essay_audit_core::features::TfidfConfig;
use essay_audit_core::llm::LlmConfig;
use essay_audit_core::probe::{EvaluationSet, KappaWeighting, SplitPolicy};
use essay_audit_core::{Attribute, ScoreScale};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{AuditError, Result};
use crate::io::ColumnMapping;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub tfidf: bool,
    pub tfidf_config: TfidfConfig,
    /// Familiar-word list; the bundled list is used when unset.
    pub familiar_words: Option<PathBuf>,
    /// Skip the familiar-word list and fall back to the syllable rule.
    pub no_familiar_words: bool,
    pub external_features: Option<PathBuf>,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            tfidf: true,
            tfidf_config: TfidfConfig::default(),
            familiar_words: None,
            no_familiar_words: false,
            external_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessSplit {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessSettings {
    pub attributes: Vec<String>,
    pub permutations: usize,
    /// Essays whose predictions enter the fairness metrics.
    pub split: FairnessSplit,
}

impl Default for FairnessSettings {
    fn default() -> Self {
        FairnessSettings { attributes: vec!["gender".into()], permutations: 1000, split: FairnessSplit::Test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub attributes: Vec<String>,
    pub split: SplitPolicy,
    pub evaluate_on: EvaluationSet,
    pub weighting: KappaWeighting,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            attributes: Attribute::ALL.iter().map(|a| a.name().to_string()).collect(),
            split: SplitPolicy::Auto,
            evaluate_on: EvaluationSet::Test,
            weighting: KappaWeighting::Quadratic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSettings {
    pub metric: ImportanceMetric,
    pub repeats: usize,
    pub shapley_samples: usize,
    pub background_size: usize,
    /// Test essays (in file order) that get per-essay explanations.
    pub instances: usize,
    pub surrogate: SurrogateOptions,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            metric: ImportanceMetric::Qwk,
            repeats: 5,
            shapley_samples: 256,
            background_size: 32,
            instances: 3,
            surrogate: SurrogateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmScorerSettings {
    pub rubric_path: PathBuf,
    #[serde(default = "default_examples_per_score")]
    pub examples_per_score: usize,
}

fn default_examples_per_score() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalScorerSettings {
    pub path: PathBuf,
}

/// The one scoring source of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    GbmClassifier,
    GbmRegressor,
    LlmZeroShot(LlmScorerSettings),
    LlmFewshotCot(LlmScorerSettings),
    External(ExternalScorerSettings),
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::GbmClassifier => "gbm_classifier",
            Scorer::GbmRegressor => "gbm_regressor",
            Scorer::LlmZeroShot(_) => "llm_zero_shot",
            Scorer::LlmFewshotCot(_) => "llm_fewshot_cot",
            Scorer::External(_) => "external",
        }
    }

    pub fn is_gbm(&self) -> bool {
        matches!(self, Scorer::GbmClassifier | Scorer::GbmRegressor)
    }
}

pub const SCORER_KINDS: [&str; 5] = ["gbm_classifier", "gbm_regressor", "llm_zero_shot", "llm_fewshot_cot", "external"];

/// Config as written. `scorer` is an object with exactly one key naming
/// the scorer; it is checked separately so every violation can be listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub corpus: CorpusConfig,
    pub scale: ScoreScale,
    #[serde(default)]
    pub prompts: Vec<String>,
    pub scorer: BTreeMap<String, Value>,
    #[serde(default)]
    pub gbm: GbmConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub features: FeatureSettings,
    #[serde(default)]
    pub fairness: FairnessSettings,
    #[serde(default)]
    pub probe: ProbeSettings,
    #[serde(default)]
    pub explain: ExplainSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("audit-output")
}

/// Validated configuration with paths resolved against the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub scorer: Scorer,
    pub fairness_attributes: Vec<Attribute>,
    pub probe_attributes: Vec<Attribute>,
    /// SHA-256 of the config file bytes.
    pub hash: String,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.raw.corpus.path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.raw.output_dir)
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }
}

fn parse_attributes(names: &[String], field: &str, errors: &mut Vec<String>) -> Vec<Attribute> {
    let mut out = Vec::new();
    for n in names {
        match n.parse::<Attribute>() {
            Ok(a) => out.push(a),
            Err(_) => errors.push(format!("{field}: unknown attribute {n:?} (expected one of {})", attribute_names())),
        }
    }
    out
}

fn attribute_names() -> String {
    Attribute::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", ")
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses and validates a config document, reporting every violation found.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| AuditError::Validation(vec![format!("schema: {e}")]))?;
    let mut errors = Vec::new();

    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let must_exist = |p: &Path, field: &str, errors: &mut Vec<String>| {
        let full = resolve(p);
        if !full.is_file() {
            errors.push(format!("{field}: file not found: {}", full.display()));
        }
    };
    must_exist(&raw.corpus.path, "corpus.path", &mut errors);
    if raw.scale.min() >= raw.scale.max() {
        errors.push("scale: min must be below max".into());
    }

    let scorer = match raw.scorer.len() {
        0 => {
            errors.push(format!("scorer: none selected (expected exactly one of {})", SCORER_KINDS.join(", ")));
            None
        }
        1 => {
            let value = serde_json::to_value(&raw.scorer).expect("map serializes");
            let (key, body) = raw.scorer.iter().next().expect("one entry");
            // unit variants are written as {"gbm_classifier": {}}
            let value = if matches!(key.as_str(), "gbm_classifier" | "gbm_regressor") {
                if !body.as_object().is_some_and(|o| o.is_empty()) && !body.is_null() {
                    errors.push(format!("scorer.{key}: takes no settings"));
                }
                Value::String(key.clone())
            } else {
                value
            };
            match serde_json::from_value::<Scorer>(value) {
                Ok(s) => Some(s),
                Err(e) => {
                    if SCORER_KINDS.contains(&key.as_str()) {
                        errors.push(format!("scorer.{key}: {e}"));
                    } else {
                        errors.push(format!("scorer: unknown kind {key:?} (expected one of {})", SCORER_KINDS.join(", ")));
                    }
                    None
                }
            }
        }
        _ => {
            let keys: Vec<&str> = raw.scorer.keys().map(String::as_str).collect();
            errors.push(format!("scorer: exactly one scorer allowed, found {}: {}", keys.len(), keys.join(", ")));
            None
        }
    };
    match &scorer {
        Some(Scorer::LlmZeroShot(s)) | Some(Scorer::LlmFewshotCot(s)) => {
            must_exist(&s.rubric_path, "scorer.rubric_path", &mut errors);
            if let Err(e) = raw.llm.validate() {
                errors.push(e.to_string());
            }
            if matches!(scorer, Some(Scorer::LlmFewshotCot(_))) && s.examples_per_score == 0 {
                errors.push("scorer.llm_fewshot_cot.examples_per_score: must be at least 1".into());
            }
        }
        Some(Scorer::External(s)) => must_exist(&s.path, "scorer.external.path", &mut errors),
        _ => {}
    }
    if let Err(e) = raw.gbm.validate() {
        errors.push(e.to_string());
    }
    if let Some(p) = &raw.features.familiar_words {
        must_exist(p, "features.familiar_words", &mut errors);
    }
    if let Some(p) = &raw.features.external_features {
        must_exist(p, "features.external_features", &mut errors);
    }
    if raw.features.tfidf && raw.features.tfidf_config.max_features == 0 {
        errors.push("features.tfidf_config.max_features: must be positive".into());
    }
    let fairness_attributes = parse_attributes(&raw.fairness.attributes, "fairness.attributes", &mut errors);
    if raw.fairness.permutations == 0 {
        errors.push("fairness.permutations: must be at least 1".into());
    }
    let probe_attributes = parse_attributes(&raw.probe.attributes, "probe.attributes", &mut errors);
    if let SplitPolicy::Stratified { test_fraction } = raw.probe.split {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            errors.push("probe.split.stratified.test_fraction: must be in (0, 1)".into());
        }
    }
    if raw.explain.repeats == 0 {
        errors.push("explain.repeats: must be at least 1".into());
    }
    if raw.explain.shapley_samples == 0 {
        errors.push("explain.shapley_samples: must be at least 1".into());
    }
    if raw.explain.background_size == 0 {
        errors.push("explain.background_size: must be at least 1".into());
    }

    if !errors.is_empty() {
        return Err(AuditError::Validation(errors));
    }
    Ok(RunConfig {
        scorer: scorer.expect("validated"),
        fairness_attributes,
        probe_attributes,
        hash: hash_bytes(text.as_bytes()),
        base_dir: base_dir.to_path_buf(),
        raw,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}
