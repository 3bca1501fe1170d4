//! Per-prompt scoring and audit sections.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use essay_audit_core::boosting::{fit_classifier, fit_regressor, GbmConfig, GbmModel, Task};
use essay_audit_core::explain::{
    column_std_devs, local_surrogate, permutation_importance, shapley_sample, ImportanceOptions, ImportanceReport,
    SurrogateExplanation, SurrogateOptions,
};
use essay_audit_core::fairness::{group_rates, odds_gap_table, osa, osd, OddsGapTable, PermutationOptions, RegressionFairnessResult};
use essay_audit_core::features::{
    build_feature_matrix, ExternalColumns, FamiliarWords, FeatureMatrix, FeatureSources, TfidfModel,
};
use essay_audit_core::linalg::Matrix;
use essay_audit_core::llm::{FewShotExample, ScoringStrategy};
use essay_audit_core::metrics::{
    build_confusion_matrix, edge_robustness, interpret_kappa, quadratic_weighted_kappa, Concordance, ConfusionMatrix,
    EdgeReport, KappaResult,
};
use essay_audit_core::probe::{run_probe, ProbeOptions, ProbeReport};
use essay_audit_core::{partition_by, Attribute, EssayRecord, Error as CoreError, PredictionRecord, ScoreScale, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::{EssayFailure, EssayInput, LlmClient, UsageSummary};
use crate::config::{FairnessSplit, RunConfig, Scorer};
use crate::error::{AuditError, Result};
use crate::io::{load_corpus, load_external_features, load_predictions, read_text, Corpus};

/// Dale-Chall familiar words shipped with the tool.
pub const BUNDLED_FAMILIAR_WORDS: &str = include_str!("../data/familiar_words.txt");

/// Loaded inputs shared by every prompt of a run.
pub struct Context {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub familiar: Option<FamiliarWords>,
    pub external_features: Option<ExternalColumns>,
    pub external_predictions: Option<Vec<PredictionRecord>>,
    pub client: Option<Arc<LlmClient>>,
    pub prompt_filter: Option<String>,
}

impl Context {
    pub fn load(config: RunConfig) -> Result<Self> {
        let scale = config.raw.scale;
        let corpus = load_corpus(&config.corpus_path(), &config.raw.corpus.columns, scale)?;
        let features = &config.raw.features;
        let familiar = if features.no_familiar_words {
            None
        } else if let Some(p) = &features.familiar_words {
            Some(FamiliarWords::parse(&read_text(&config.resolve(p))?))
        } else {
            Some(FamiliarWords::parse(BUNDLED_FAMILIAR_WORDS))
        };
        let external_features = match &features.external_features {
            Some(p) => Some(load_external_features(&config.resolve(p))?),
            None => None,
        };
        let external_predictions = match &config.scorer {
            Scorer::External(s) => Some(load_predictions(&config.resolve(&s.path), scale)?),
            _ => None,
        };
        let client = match &config.scorer {
            Scorer::LlmZeroShot(_) | Scorer::LlmFewshotCot(_) => Some(Arc::new(LlmClient::new(config.raw.llm.clone()))),
            _ => None,
        };
        Ok(Context { config, corpus, familiar, external_features, external_predictions, client, prompt_filter: None })
    }

    pub fn with_client(mut self, client: LlmClient) -> Self {
        self.client = Some(Arc::new(client));
        self
    }

    pub fn scale(&self) -> ScoreScale {
        self.config.raw.scale
    }

    /// Prompts to process: the corpus prompts, narrowed by the config list
    /// and the command-line filter.
    pub fn prompts(&self) -> Result<Vec<String>> {
        let all = self.corpus.prompts();
        let mut chosen: BTreeSet<&str> = if self.config.raw.prompts.is_empty() {
            all.clone()
        } else {
            self.config.raw.prompts.iter().map(String::as_str).collect()
        };
        if let Some(p) = &self.prompt_filter {
            chosen.retain(|c| c == p);
            if chosen.is_empty() {
                return Err(AuditError::Config(format!("prompt {p:?} is not selected by the config")));
            }
        }
        for p in &chosen {
            if !all.contains(p) {
                return Err(AuditError::Config(format!("prompt {p:?} does not occur in the corpus")));
            }
        }
        Ok(chosen.into_iter().map(String::from).collect())
    }

    pub fn records(&self, prompt: &str) -> Vec<EssayRecord> {
        self.corpus.records.iter().filter(|r| r.prompt_name == prompt).cloned().collect()
    }
}

/// Fitted feature pipeline and model of a boosting scorer.
#[derive(Debug, Clone)]
pub struct TrainedGbm {
    pub model: GbmModel,
    pub tfidf: Option<TfidfModel>,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub test_truth: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOutcome {
    pub predictions: Vec<PredictionRecord>,
    pub failures: Vec<EssayFailure>,
    pub notes: Vec<String>,
    pub usage: Option<UsageSummary>,
    pub gbm: Option<TrainedGbm>,
}

fn split_records(records: &[EssayRecord]) -> (Vec<EssayRecord>, Vec<EssayRecord>) {
    records.iter().cloned().partition(|r| r.split == Split::Train)
}

fn features_for(
    essays: &[EssayRecord],
    sources: &FeatureSources<'_>,
    failures: &mut Vec<EssayFailure>,
) -> Result<Option<(FeatureMatrix, Vec<EssayRecord>)>> {
    let mut kept = Vec::with_capacity(essays.len());
    for e in essays {
        match build_feature_matrix(std::slice::from_ref(e), sources) {
            Ok(_) => kept.push(e.clone()),
            Err(err @ (CoreError::Essay { .. } | CoreError::MissingEssay(_))) => failures.push(EssayFailure {
                essay_id: e.essay_id.clone(),
                attempts: 1,
                errors: vec![format!("features: {err}")],
            }),
            Err(err) => return Err(AuditError::core("features", err)),
        }
    }
    if kept.is_empty() {
        return Ok(None);
    }
    let m = build_feature_matrix(&kept, sources).map_err(|e| AuditError::core("features", e))?;
    Ok(Some((m, kept)))
}

fn gbm_config(ctx: &Context) -> GbmConfig {
    GbmConfig { seed: ctx.config.seed(), ..ctx.config.raw.gbm }
}

fn score_gbm(ctx: &Context, prompt: &str, records: &[EssayRecord], task: Task) -> Result<ScoreOutcome> {
    let (train, test) = split_records(records);
    if train.is_empty() {
        return Err(AuditError::Config(format!("prompt {prompt:?}: no training essays for the boosting scorer")));
    }
    if test.is_empty() {
        return Err(AuditError::Config(format!("prompt {prompt:?}: no test essays to score")));
    }
    let settings = &ctx.config.raw.features;
    let tfidf = if settings.tfidf {
        let texts: Vec<&str> = train.iter().map(|r| r.full_text.as_str()).collect();
        match TfidfModel::fit(&texts, settings.tfidf_config) {
            Ok(m) => Some(m),
            Err(CoreError::EmptyVocabulary) => None,
            Err(e) => return Err(AuditError::core(format!("prompt {prompt:?}: tf-idf"), e)),
        }
    } else {
        None
    };
    let sources = FeatureSources {
        familiar_words: ctx.familiar.as_ref(),
        tfidf: tfidf.as_ref(),
        external: ctx.external_features.as_ref(),
    };
    let mut outcome = ScoreOutcome::default();
    if settings.tfidf && tfidf.is_none() {
        outcome.notes.push("tf-idf vocabulary empty after document-frequency filtering; block omitted".into());
    }
    let mut train_failures = Vec::new();
    let (train_m, train_kept) = features_for(&train, &sources, &mut train_failures)?
        .ok_or_else(|| AuditError::Config(format!("prompt {prompt:?}: no usable training essays")))?;
    if !train_failures.is_empty() {
        outcome.notes.push(format!("{} training essays dropped by feature extraction", train_failures.len()));
    }
    let Some((test_m, test_kept)) = features_for(&test, &sources, &mut outcome.failures)? else {
        return Ok(outcome);
    };
    let cfg = gbm_config(ctx);
    let scale = ctx.scale();
    let model = match task {
        Task::Classifier => {
            let y: Vec<i32> = train_kept.iter().map(|r| r.holistic_score).collect();
            fit_classifier(&train_m.values, &y, &cfg)
        }
        Task::Regressor => {
            let y: Vec<f64> = train_kept.iter().map(|r| f64::from(r.holistic_score)).collect();
            fit_regressor(&train_m.values, &y, &cfg)
        }
    }
    .map_err(|e| AuditError::core(format!("prompt {prompt:?}: boosting"), e))?;
    for (i, rec) in test_kept.iter().enumerate() {
        let row = test_m.values.row(i);
        let pred = model.predict_row(row, scale).map_err(|e| AuditError::core("predict", e))?;
        let mut p = PredictionRecord::new(rec.essay_id.clone(), rec.holistic_score, pred);
        if task == Task::Classifier {
            let proba = model.predict_proba_row(row).map_err(|e| AuditError::core("predict", e))?;
            p.confidence = Some(proba.into_iter().fold(0.0, f64::max));
        }
        outcome.predictions.push(p);
    }
    outcome.gbm = Some(TrainedGbm {
        model,
        tfidf,
        train: train_m,
        test_truth: test_kept.iter().map(|r| f64::from(r.holistic_score)).collect(),
        test: test_m,
    });
    Ok(outcome)
}

/// `per_score` training essays for each score, chosen by a seeded shuffle.
pub fn pick_examples(train: &[EssayRecord], scale: ScoreScale, per_score: usize, seed: u64) -> Vec<FewShotExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in scale.scores() {
        let mut pool: Vec<&EssayRecord> = train.iter().filter(|r| r.holistic_score == s).collect();
        pool.shuffle(&mut rng);
        out.extend(pool.into_iter().take(per_score).map(|r| FewShotExample { essay: r.full_text.clone(), score: s }));
    }
    out
}

fn score_llm(ctx: &Context, prompt: &str, records: &[EssayRecord]) -> Result<ScoreOutcome> {
    let client = ctx.client.as_ref().ok_or_else(|| AuditError::Config("LLM scorer without a client".into()))?;
    let scale = ctx.scale();
    let (settings, fewshot) = match &ctx.config.scorer {
        Scorer::LlmZeroShot(s) => (s, false),
        Scorer::LlmFewshotCot(s) => (s, true),
        _ => unreachable!("called for LLM scorers only"),
    };
    let rubric = read_text(&ctx.config.resolve(&settings.rubric_path))?;
    let (train, test) = split_records(records);
    let mut outcome = ScoreOutcome::default();
    let strategy = if fewshot {
        let examples = pick_examples(&train, scale, settings.examples_per_score, ctx.config.seed());
        let covered: BTreeSet<i32> = examples.iter().map(|e| e.score).collect();
        let missing: Vec<String> = scale.scores().filter(|s| !covered.contains(s)).map(|s| s.to_string()).collect();
        if !missing.is_empty() {
            outcome.notes.push(format!("no training examples for scores {}", missing.join(", ")));
        }
        if examples.is_empty() {
            return Err(AuditError::Config(format!("prompt {prompt:?}: no training essays to use as examples")));
        }
        ScoringStrategy::FewshotCot { rubric, examples }
    } else {
        ScoringStrategy::ZeroShot { rubric }
    };
    let inputs: Vec<EssayInput> = test
        .iter()
        .map(|r| EssayInput { essay_id: &r.essay_id, text: &r.full_text, true_score: r.holistic_score })
        .collect();
    let before = client.tally.snapshot();
    for r in client.score_batch(&strategy, &inputs, scale) {
        match r {
            Ok(s) => outcome.predictions.push(s.prediction),
            Err(f) => outcome.failures.push(f),
        }
    }
    let after = client.tally.snapshot();
    outcome.usage = Some(UsageSummary {
        requests: after.requests - before.requests,
        retries: after.retries - before.retries,
        failures: after.failures - before.failures,
        latency_ms: after.latency_ms - before.latency_ms,
    });
    Ok(outcome)
}

fn score_external(ctx: &Context, prompt: &str, records: &[EssayRecord]) -> Result<ScoreOutcome> {
    let preds = ctx.external_predictions.as_ref().expect("loaded with the external scorer");
    let corpus_ids: BTreeSet<&str> = ctx.corpus.records.iter().map(|r| r.essay_id.as_str()).collect();
    if let Some(p) = preds.iter().find(|p| !corpus_ids.contains(p.essay_id.as_str())) {
        return Err(AuditError::core("external predictions", CoreError::MissingEssay(p.essay_id.clone())));
    }
    let truth: BTreeMap<&str, i32> = records.iter().map(|r| (r.essay_id.as_str(), r.holistic_score)).collect();
    let mut outcome = ScoreOutcome::default();
    let mut mismatched = 0;
    for p in preds {
        if let Some(&t) = truth.get(p.essay_id.as_str()) {
            if t != p.true_score {
                mismatched += 1;
            }
            outcome.predictions.push(p.clone());
        }
    }
    if mismatched > 0 {
        outcome.notes.push(format!("{mismatched} predictions carry a true_score that differs from the corpus ({prompt})"));
    }
    Ok(outcome)
}

pub fn score_prompt(ctx: &Context, prompt: &str) -> Result<ScoreOutcome> {
    let records = ctx.records(prompt);
    match &ctx.config.scorer {
        Scorer::GbmClassifier => score_gbm(ctx, prompt, &records, Task::Classifier),
        Scorer::GbmRegressor => score_gbm(ctx, prompt, &records, Task::Regressor),
        Scorer::LlmZeroShot(_) | Scorer::LlmFewshotCot(_) => score_llm(ctx, prompt, &records),
        Scorer::External(_) => score_external(ctx, prompt, &records),
    }
}

/// Present, or skipped with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section<T> {
    Present(T),
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn skipped(reason: impl Into<String>) -> Self {
        Section::Skipped { reason: reason.into() }
    }

    pub fn present(&self) -> Option<&T> {
        match self {
            Section::Present(t) => Some(t),
            Section::Skipped { .. } => None,
        }
    }

    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(t) => Section::Present(t),
            Err(e) => Section::skipped(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySection {
    pub n: usize,
    pub kappa: KappaResult,
    pub interpretation: Concordance,
    pub confusion: ConfusionMatrix,
    pub edge: EdgeReport,
}

pub fn accuracy_section(preds: &[PredictionRecord], scale: ScoreScale) -> Result<AccuracySection> {
    let cm = build_confusion_matrix(preds, scale).map_err(|e| AuditError::core("accuracy", e))?;
    let kappa = quadratic_weighted_kappa(&cm).map_err(|e| AuditError::core("accuracy", e))?;
    Ok(AccuracySection {
        n: preds.len(),
        interpretation: interpret_kappa(kappa.kappa).map_err(|e| AuditError::core("accuracy", e))?,
        kappa,
        edge: edge_robustness(&cm),
        confusion: cm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeFairness {
    pub group_sizes: BTreeMap<String, usize>,
    pub excluded_unknown: usize,
    pub odds: Section<OddsGapTable>,
    pub osa: Section<RegressionFairnessResult>,
    pub osd: Section<RegressionFairnessResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSection {
    pub n: usize,
    pub split: FairnessSplit,
    pub attributes: BTreeMap<String, Section<AttributeFairness>>,
}

pub fn attribute_fairness(
    preds: &[PredictionRecord],
    records: &[EssayRecord],
    attribute: Attribute,
    scale: ScoreScale,
    options: PermutationOptions,
) -> Result<AttributeFairness> {
    let partition = partition_by(records, attribute).map_err(|e| AuditError::core(attribute.name(), e))?;
    let odds = Section::from_result(
        group_rates(preds, &partition, scale).map(|r| odds_gap_table(&r)).map_err(|e| AuditError::core("equalized odds", e)),
    );
    let osa_r = Section::from_result(osa(preds, records, &[attribute], options).map_err(|e| AuditError::core("OSA", e)));
    let osd_r = Section::from_result(osd(preds, records, &[attribute], options).map_err(|e| AuditError::core("OSD", e)));
    let ids: BTreeSet<&str> = preds.iter().map(|p| p.essay_id.as_str()).collect();
    let mut group_sizes = BTreeMap::new();
    for (id, g) in &partition.assignment {
        if ids.contains(id.as_str()) {
            *group_sizes.entry(g.clone()).or_insert(0) += 1;
        }
    }
    let excluded_unknown = partition.excluded.iter().filter(|id| ids.contains(id.as_str())).count();
    Ok(AttributeFairness { group_sizes, excluded_unknown, odds, osa: osa_r, osd: osd_r })
}

pub fn fairness_section(
    preds: &[PredictionRecord],
    records: &[EssayRecord],
    attributes: &[Attribute],
    split: FairnessSplit,
    scale: ScoreScale,
    options: PermutationOptions,
) -> Result<FairnessSection> {
    let preds: Vec<PredictionRecord> = match split {
        FairnessSplit::All => preds.to_vec(),
        FairnessSplit::Test => {
            let test: BTreeSet<&str> =
                records.iter().filter(|r| r.split == Split::Test).map(|r| r.essay_id.as_str()).collect();
            preds.iter().filter(|p| test.contains(p.essay_id.as_str())).cloned().collect()
        }
    };
    if preds.is_empty() {
        return Err(AuditError::core("fairness", CoreError::EmptyInput("no predictions in the fairness split")));
    }
    let attributes_out = attributes
        .iter()
        .map(|&a| (a.name().to_string(), Section::from_result(attribute_fairness(&preds, records, a, scale, options))))
        .collect();
    Ok(FairnessSection { n: preds.len(), split, attributes: attributes_out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceExplanation {
    pub essay_id: String,
    pub output: f64,
    pub baseline: f64,
    pub efficiency_gap: f64,
    /// Largest attributions by magnitude.
    pub top_attributions: Vec<(String, f64)>,
    pub surrogate: Section<NamedSurrogate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSurrogate {
    pub features: Vec<(String, f64)>,
    pub intercept: f64,
    pub fidelity: f64,
    pub kernel_width: f64,
    pub n_perturbations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSection {
    pub importance: ImportanceReport,
    pub instances: Vec<InstanceExplanation>,
}

const TOP_ATTRIBUTIONS: usize = 10;

fn rows_of(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols);
    for (i, &r) in rows.iter().enumerate() {
        out.data[i * m.cols..(i + 1) * m.cols].copy_from_slice(m.row(r));
    }
    out
}

pub fn explain_section(ctx: &Context, gbm: &TrainedGbm) -> Result<ExplainSection> {
    let settings = &ctx.config.raw.explain;
    let seed = ctx.config.seed();
    let names = &gbm.train.columns;
    let opts = ImportanceOptions { metric: settings.metric, scale: ctx.scale(), repeats: settings.repeats, seed };
    let importance = permutation_importance(&gbm.model, &gbm.test.values, &gbm.test_truth, names, &opts)
        .map_err(|e| AuditError::core("permutation importance", e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bg_rows: Vec<usize> = (0..gbm.train.values.rows).collect();
    bg_rows.shuffle(&mut rng);
    bg_rows.truncate(settings.background_size);
    bg_rows.sort_unstable();
    let background = rows_of(&gbm.train.values, &bg_rows);

    // Only features the model reads are perturbed; the rest cannot move
    // its output. If they outnumber the perturbations, keep the most
    // important ones.
    let sds = column_std_devs(&gbm.train.values);
    let used = gbm.model.used_features();
    let limit = settings.surrogate.n_perturbations.saturating_sub(1) / 2;
    let mut candidates: Vec<usize> = used.iter().copied().filter(|&j| sds[j] > 0.0).collect();
    if candidates.len() > limit {
        candidates.sort_by(|&a, &b| {
            importance.features[b].mean_drop.total_cmp(&importance.features[a].mean_drop).then(a.cmp(&b))
        });
        candidates.truncate(limit);
    }
    let mut scales = vec![0.0; sds.len()];
    for &j in &candidates {
        scales[j] = sds[j];
    }

    let mut instances = Vec::new();
    for i in 0..settings.instances.min(gbm.test.values.rows) {
        let x = gbm.test.values.row(i);
        let att = shapley_sample(&gbm.model, x, &background, settings.shapley_samples, seed.wrapping_add(i as u64))
            .map_err(|e| AuditError::core("shapley", e))?;
        let mut order: Vec<usize> = (0..att.attributions.len()).collect();
        order.sort_by(|&a, &b| att.attributions[b].abs().total_cmp(&att.attributions[a].abs()).then(a.cmp(&b)));
        let top_attributions = order
            .into_iter()
            .take(TOP_ATTRIBUTIONS)
            .filter(|&j| att.attributions[j] != 0.0)
            .map(|j| (names[j].clone(), att.attributions[j]))
            .collect();
        let sopts = SurrogateOptions { seed: seed.wrapping_add(i as u64), ..settings.surrogate };
        let surrogate = Section::from_result(
            local_surrogate(&gbm.model, x, &scales, &sopts)
                .map(|s: SurrogateExplanation| NamedSurrogate {
                    features: s.features.iter().map(|w| (names[w.index].clone(), w.weight)).collect(),
                    intercept: s.intercept,
                    fidelity: s.fidelity,
                    kernel_width: s.kernel_width,
                    n_perturbations: s.n_perturbations,
                })
                .map_err(|e| AuditError::core("local surrogate", e)),
        );
        instances.push(InstanceExplanation {
            essay_id: gbm.test.essay_ids[i].clone(),
            output: att.output,
            baseline: att.baseline,
            efficiency_gap: att.efficiency_gap(),
            top_attributions,
            surrogate,
        });
    }
    Ok(ExplainSection { importance, instances })
}

pub fn probe_section(ctx: &Context, records: &[EssayRecord]) -> Result<ProbeReport> {
    let p = &ctx.config.raw.probe;
    let options = ProbeOptions {
        attributes: ctx.config.probe_attributes.clone(),
        split: p.split,
        evaluate_on: p.evaluate_on,
        weighting: p.weighting,
        seed: ctx.config.seed(),
    };
    run_probe(records, ctx.scale(), &gbm_config(ctx), &options).map_err(|e| AuditError::core("probe", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sections {
    pub score: bool,
    pub accuracy: bool,
    pub fairness: bool,
    pub probe: bool,
    pub explain: bool,
}

impl Sections {
    pub const ALL: Sections = Sections { score: true, accuracy: true, fairness: true, probe: true, explain: true };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSummary {
    pub scorer: String,
    pub n_predictions: usize,
    pub n_failures: usize,
    pub failures: Vec<EssayFailure>,
    pub notes: Vec<String>,
    pub usage: Option<UsageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptReport {
    pub prompt: String,
    pub n_essays: usize,
    pub scoring: Section<ScoringSummary>,
    pub accuracy: Section<AccuracySection>,
    pub fairness: Section<FairnessSection>,
    pub probe: Section<ProbeReport>,
    pub explain: Section<ExplainSection>,
}

/// Outputs of one prompt: the report plus the artifacts behind it.
pub struct PromptRun {
    pub report: PromptReport,
    pub outcome: Option<ScoreOutcome>,
}

const NOT_REQUESTED: &str = "not requested by this command";

pub fn run_prompt(ctx: &Context, prompt: &str, sections: Sections) -> PromptRun {
    let records = ctx.records(prompt);
    let needs_scores = sections.score || sections.accuracy || sections.fairness || sections.explain;
    let scored = if needs_scores { Some(score_prompt(ctx, prompt)) } else { None };
    let scale = ctx.scale();
    let (scoring, outcome) = match scored {
        None => (Section::skipped(NOT_REQUESTED), None),
        Some(Err(e)) => (Section::skipped(format!("scoring failed: {e}")), None),
        Some(Ok(o)) => (
            Section::Present(ScoringSummary {
                scorer: ctx.config.scorer.name().to_string(),
                n_predictions: o.predictions.len(),
                n_failures: o.failures.len(),
                failures: o.failures.clone(),
                notes: o.notes.clone(),
                usage: o.usage,
            }),
            Some(o),
        ),
    };
    let no_scores = || match &scoring {
        Section::Skipped { reason } => reason.clone(),
        Section::Present(_) => "no predictions".to_string(),
    };
    let preds = outcome.as_ref().map(|o| o.predictions.as_slice()).filter(|p| !p.is_empty());

    let accuracy = match (sections.accuracy, preds) {
        (false, _) => Section::skipped(NOT_REQUESTED),
        (true, None) => Section::skipped(no_scores()),
        (true, Some(p)) => Section::from_result(accuracy_section(p, scale)),
    };
    let fairness = match (sections.fairness, preds) {
        (false, _) => Section::skipped(NOT_REQUESTED),
        (true, None) => Section::skipped(no_scores()),
        (true, Some(p)) => {
            let f = &ctx.config.raw.fairness;
            let options = PermutationOptions { permutations: f.permutations, seed: ctx.config.seed() };
            Section::from_result(fairness_section(p, &records, &ctx.config.fairness_attributes, f.split, scale, options))
        }
    };
    let probe = if sections.probe {
        Section::from_result(probe_section(ctx, &records))
    } else {
        Section::skipped(NOT_REQUESTED)
    };
    let explain = if !sections.explain {
        Section::skipped(NOT_REQUESTED)
    } else if !ctx.config.scorer.is_gbm() {
        Section::skipped(format!("explanations need a boosting scorer, not {}", ctx.config.scorer.name()))
    } else {
        match outcome.as_ref().and_then(|o| o.gbm.as_ref()) {
            Some(g) => Section::from_result(explain_section(ctx, g)),
            None => Section::skipped(no_scores()),
        }
    };
    PromptRun {
        report: PromptReport { prompt: prompt.to_string(), n_essays: records.len(), scoring, accuracy, fairness, probe, explain },
        outcome,
    }
}

/// Runs every selected prompt concurrently; results are keyed by prompt.
pub fn run_prompts(ctx: &Context, sections: Sections) -> Result<BTreeMap<String, PromptRun>> {
    let prompts = ctx.prompts()?;
    let mut out = BTreeMap::new();
    std::thread::scope(|s| {
        let handles: Vec<_> =
            prompts.iter().map(|p| (p.clone(), s.spawn(move || run_prompt(ctx, p, sections)))).collect();
        for (p, h) in handles {
            out.insert(p, h.join().expect("prompt worker panicked"));
        }
    });
    Ok(out)
}
