use serde::{Deserialize, Serialize};

use super::text::TextStats;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityScores {
    pub flesch_reading_ease: f64,
    pub flesch_kincaid_grade: f64,
    pub gunning_fog: f64,
    pub dale_chall: f64,
    pub automated_readability_index: f64,
    pub coleman_liau: f64,
}

impl ReadabilityScores {
    pub const NAMES: [&'static str; 6] = [
        "flesch_reading_ease",
        "flesch_kincaid_grade",
        "gunning_fog",
        "dale_chall",
        "automated_readability_index",
        "coleman_liau",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.flesch_reading_ease,
            self.flesch_kincaid_grade,
            self.gunning_fog,
            self.dale_chall,
            self.automated_readability_index,
            self.coleman_liau,
        ]
    }
}

/// Published readability formulas over word, sentence, syllable, letter and
/// hard-word counts.
pub fn readability(stats: &TextStats) -> Result<ReadabilityScores> {
    if stats.word_count == 0 || stats.sentence_count == 0 {
        return Err(Error::EmptyText);
    }
    let words = stats.word_count as f64;
    let sentences = stats.sentence_count as f64;
    let words_per_sentence = words / sentences;
    let syllables_per_word = stats.syllable_count as f64 / words;
    let letters_per_word = stats.character_count as f64 / words;

    let difficult_pct = 100.0 * stats.difficult_word_count as f64 / words;
    let mut dale_chall = 0.1579 * difficult_pct + 0.0496 * words_per_sentence;
    if difficult_pct > 5.0 {
        dale_chall += 3.6365;
    }

    Ok(ReadabilityScores {
        flesch_reading_ease: 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word,
        flesch_kincaid_grade: 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59,
        gunning_fog: 0.4 * (words_per_sentence + 100.0 * stats.complex_word_count as f64 / words),
        dale_chall,
        automated_readability_index: 4.71 * letters_per_word + 0.5 * words_per_sentence - 21.43,
        // letters and sentences per 100 words
        coleman_liau: 0.0588 * (100.0 * letters_per_word) - 0.296 * (100.0 * sentences / words) - 15.8,
    })
}
