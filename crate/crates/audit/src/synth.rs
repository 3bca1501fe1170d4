//! Seeded synthetic essays with PERSUADE-like columns, for fixtures and
//! throughput checks. Higher scores get longer essays with longer
//! sentences and more polysyllabic vocabulary.

use essay_audit_core::{Attribute, DemographicProfile, EssayRecord, PredictionRecord, Split, TaskType};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};

const PLAIN: &[&str] = &[
    "the", "a", "people", "think", "good", "idea", "we", "can", "do", "it", "help", "make", "school", "time", "work",
    "friend", "they", "be", "have", "more", "some", "other", "way", "get", "want", "like", "big", "thing", "day", "life",
];

const RICH: &[&str] = &[
    "perspective", "consideration", "opportunity", "significantly", "community", "responsibility", "alternatively",
    "evidence", "ultimately", "collaboration", "beneficial", "individual", "particularly", "consequently",
    "interpretation", "technology", "development", "experience", "necessary", "environmental",
];

/// Relative frequency of scores 1..6.
const SCORE_WEIGHTS: [f64; 6] = [4.0, 14.0, 32.0, 30.0, 15.0, 5.0];

const LABELS: [(Attribute, &[&str]); 6] = [
    (Attribute::Gender, &["F", "M"]),
    (Attribute::GradeLevel, &["6", "8", "10", "12"]),
    (Attribute::EllStatus, &["No", "Yes"]),
    (Attribute::RaceEthnicity, &["Asian", "Black", "Hispanic", "White", "Other"]),
    (Attribute::EconomicStatus, &["Disadvantaged", "Not disadvantaged"]),
    (Attribute::DisabilityStatus, &["Identified", "Not identified"]),
];

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub prompts: Vec<String>,
    pub essays_per_prompt: usize,
    pub test_fraction: f64,
    /// Share of demographic cells left unknown.
    pub unknown_rate: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            prompts: vec!["Seeking multiple opinions".into(), "Phones and driving".into(), "Car-free cities".into()],
            essays_per_prompt: 200,
            test_fraction: 0.25,
            unknown_rate: 0.03,
            seed: 7,
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, score: i32) -> String {
    let len = rng.random_range(5..9) + 2 * score as usize;
    let rich_share = 0.05 + 0.07 * score as f64;
    let mut words: Vec<&str> = Vec::with_capacity(len);
    for _ in 0..len {
        let pool = if rng.random::<f64>() < rich_share { RICH } else { PLAIN };
        words.push(pool.choose(rng).expect("non-empty pool"));
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push(if rng.random::<f64>() < 0.1 { '!' } else { '.' });
    s
}

fn essay_text(rng: &mut ChaCha8Rng, score: i32) -> String {
    let noisy = Normal::new(2.0 + 1.5 * score as f64, 1.5).expect("valid normal");
    let n = noisy.sample(rng).round().clamp(2.0, 30.0) as usize;
    (0..n).map(|_| sentence(rng, score)).collect::<Vec<_>>().join(" ")
}

pub fn generate_corpus(opts: &SynthOptions) -> Vec<EssayRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scores = WeightedIndex::new(SCORE_WEIGHTS).expect("positive weights");
    let mut out = Vec::with_capacity(opts.prompts.len() * opts.essays_per_prompt);
    for (p, prompt) in opts.prompts.iter().enumerate() {
        let task_type = if p % 2 == 0 { TaskType::Independent } else { TaskType::SourceBased };
        for i in 0..opts.essays_per_prompt {
            let score = scores.sample(&mut rng) as i32 + 1;
            let full_text = essay_text(&mut rng, score);
            let word_count = full_text.split_whitespace().count() as u32;
            let mut demographics = DemographicProfile::default();
            for (attr, labels) in LABELS {
                if rng.random::<f64>() >= opts.unknown_rate {
                    demographics.set(attr, labels.choose(&mut rng).expect("labels"));
                }
            }
            let split = if rng.random::<f64>() < opts.test_fraction { Split::Test } else { Split::Train };
            out.push(EssayRecord {
                essay_id: format!("P{p}-{i:05}"),
                full_text,
                prompt_name: prompt.clone(),
                task_type,
                holistic_score: score,
                word_count,
                split,
                demographics,
            });
        }
    }
    out
}

/// Predictions that agree with the truth most of the time and otherwise
/// miss by one, clipped to 1..6.
pub fn noisy_predictions(records: &[EssayRecord], agreement: f64, seed: u64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            let mut pred = r.holistic_score;
            if rng.random::<f64>() >= agreement {
                pred += if rng.random::<bool>() { 1 } else { -1 };
            }
            PredictionRecord::new(r.essay_id.clone(), r.holistic_score, pred.clamp(1, 6))
        })
        .collect()
}
