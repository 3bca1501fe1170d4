use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase familiar-word list used for the Dale-Chall difficulty count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FamiliarWords(BTreeSet<String>);

impl FamiliarWords {
    /// One word per line; blank lines ignored.
    pub fn parse(list: &str) -> Self {
        FamiliarWords(
            list.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_lowercase).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lookup of a lowercase word, also trying it without a possessive `'s`.
    pub fn contains(&self, word: &str) -> bool {
        if self.0.contains(word) {
            return true;
        }
        word.strip_suffix("'s").is_some_and(|w| self.0.contains(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub word_count: usize,
    pub sentence_count: usize,
    /// Letters inside words (apostrophes excluded).
    pub character_count: usize,
    pub syllable_count: usize,
    /// Words of three or more syllables.
    pub complex_word_count: usize,
    pub difficult_word_count: usize,
    /// False when no familiar-word list was supplied and difficult words
    /// fell back to the complex-word rule.
    pub difficult_from_list: bool,
    pub avg_sentence_length: Option<f64>,
    pub avg_syllables_per_word: Option<f64>,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate for one lowercase word.
///
/// A trailing `e` that forms its own vowel group is silent, except in a
/// consonant + `le` ending ("little"). Every word has at least one syllable.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
    if letters.is_empty() {
        return 0;
    }
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Maximal runs of letters and apostrophes that contain at least one letter.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphabetic() || c == '\'' || c == '\u{2019}'))
        .filter(|w| w.chars().any(char::is_alphabetic))
}

/// Text segments ended by a run of `.`, `!` or `?` followed by whitespace or
/// the end of the text. The trailing unterminated segment is included.
fn sentence_segments(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if matches!(d, '.' | '!' | '?') {
                end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        let boundary = match chars.peek() {
            None => true,
            Some(&(_, d)) => d.is_whitespace(),
        };
        if boundary {
            out.push(&text[start..end]);
            start = end;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

pub fn analyze_text(text: &str, familiar: Option<&FamiliarWords>) -> Result<TextStats> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let sentence_count = sentence_segments(text).into_iter().filter(|s| words(s).next().is_some()).count();
    let mut stats = TextStats {
        word_count: 0,
        sentence_count,
        character_count: 0,
        syllable_count: 0,
        complex_word_count: 0,
        difficult_word_count: 0,
        difficult_from_list: familiar.is_some(),
        avg_sentence_length: None,
        avg_syllables_per_word: None,
    };
    for w in words(text) {
        let lower: String = w.chars().map(|c| if c == '\u{2019}' { '\'' } else { c }).flat_map(char::to_lowercase).collect();
        let syl = count_syllables(&lower);
        stats.word_count += 1;
        stats.character_count += lower.chars().filter(|c| c.is_alphabetic()).count();
        stats.syllable_count += syl;
        if syl >= 3 {
            stats.complex_word_count += 1;
        }
        let difficult = match familiar {
            Some(list) => !list.contains(&lower),
            None => syl >= 3,
        };
        if difficult {
            stats.difficult_word_count += 1;
        }
    }
    if stats.word_count == 0 {
        return Err(Error::EmptyText);
    }
    if stats.sentence_count > 0 {
        stats.avg_sentence_length = Some(stats.word_count as f64 / stats.sentence_count as f64);
    }
    stats.avg_syllables_per_word = Some(stats.syllable_count as f64 / stats.word_count as f64);
    Ok(stats)
}
