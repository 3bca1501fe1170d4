//! Prompt construction, chat wire types and score parsing for LLM scoring.
//! The HTTP client lives in the `essay-audit` crate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::ScoreScale;
use crate::error::{Error, Result};

pub const ZERO_SHOT_PREAMBLE: &str = "You are an expert evaluator of student essays, and your task is to score an essay based on the rubric: Holistic Rating for Source-Based Writing. After reading the essay, assign a holistic score based. Act as an impartial evaluator. Return the score in a structure with the following format: score = {score value}.";
pub const EXAMPLES_INTRO: &str = "Learn how the grading is performed by analyzing these examples:";
pub const EARNED_SCORE: &str = "Based on the rubric, the student earned a score of:";
pub const COT_TRIGGER: &str = "Let's think step by step.";
pub const RUBRIC_DELIMITER: &str = "RUBRIC:";
pub const ESSAY_DELIMITER: &str = "ESSAY:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub api_key_env: String,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o-mini".to_string(),
            temperature: 0.2,
            max_retries: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
            timeout_ms: 60_000,
            api_key_env: "OPENAI_API_KEY".to_string(),
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidConfig("llm: temperature must be non-negative".to_string()));
        }
        if self.max_in_flight < 1 {
            return Err(Error::InvalidConfig("llm: max_in_flight must be at least 1".to_string()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(Error::InvalidConfig("llm: endpoint is empty".to_string()));
        }
        if self.model.trim().is_empty() {
            return Err(Error::InvalidConfig("llm: model is empty".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub essay: String,
    pub score: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoringStrategy {
    ZeroShot { rubric: String },
    FewshotCot { rubric: String, examples: Vec<FewShotExample> },
}

impl ScoringStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            ScoringStrategy::ZeroShot { .. } => "zero_shot",
            ScoringStrategy::FewshotCot { .. } => "fewshot_cot",
        }
    }

    pub fn build_prompt(&self, essay: &str, scale: ScoreScale) -> Result<String> {
        match self {
            ScoringStrategy::ZeroShot { rubric } => build_zero_shot_prompt(essay, rubric),
            ScoringStrategy::FewshotCot { rubric, examples } => build_fewshot_cot_prompt(essay, rubric, examples, scale),
        }
    }
}

fn require_text(text: &str, what: &'static str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput(what));
    }
    Ok(())
}

fn push_line(out: &mut String, line: &str) {
    out.push_str(line);
    out.push('\n');
}

fn push_target(out: &mut String, rubric: &str, essay: &str) {
    push_line(out, RUBRIC_DELIMITER);
    push_line(out, rubric);
    push_line(out, ESSAY_DELIMITER);
    push_line(out, essay);
}

/// Preamble, then the rubric and essay under their delimiter lines. Every
/// line ends in `\n`; essay and rubric bodies are copied unchanged.
pub fn build_zero_shot_prompt(essay: &str, rubric: &str) -> Result<String> {
    require_text(essay, "essay text")?;
    require_text(rubric, "rubric text")?;
    let mut out = String::with_capacity(ZERO_SHOT_PREAMBLE.len() + rubric.len() + essay.len() + 32);
    push_line(&mut out, ZERO_SHOT_PREAMBLE);
    push_target(&mut out, rubric, essay);
    Ok(out)
}

/// Preamble, worked examples ordered by (score, input order), the
/// step-by-step trigger, then rubric and essay.
pub fn build_fewshot_cot_prompt(essay: &str, rubric: &str, examples: &[FewShotExample], scale: ScoreScale) -> Result<String> {
    require_text(essay, "essay text")?;
    require_text(rubric, "rubric text")?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("few-shot examples"));
    }
    for ex in examples {
        scale.check(ex.score)?;
        require_text(&ex.essay, "example essay text")?;
    }
    let mut ordered: Vec<&FewShotExample> = examples.iter().collect();
    // stable sort keeps input order within a score
    ordered.sort_by_key(|e| e.score);

    let mut out = String::new();
    push_line(&mut out, ZERO_SHOT_PREAMBLE);
    push_line(&mut out, EXAMPLES_INTRO);
    for (k, ex) in ordered.iter().enumerate() {
        let _ = writeln!(out, "EXAMPLE {}:", k + 1);
        push_line(&mut out, &ex.essay);
        let _ = writeln!(out, "{EARNED_SCORE} {}", ex.score);
    }
    push_line(&mut out, COT_TRIGGER);
    push_target(&mut out, rubric, essay);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedScore {
    pub score: i32,
    pub raw: String,
}

/// Integer following the first `score = ` (case-insensitive, optional
/// braces), if any. Decimals and signed values do not match.
fn find_score(text: &str) -> Option<i64> {
    let bytes = text.as_bytes();
    let lower: Vec<u8> = bytes.iter().map(u8::to_ascii_lowercase).collect();
    let mut from = 0;
    while let Some(pos) = lower[from..].windows(5).position(|w| w == b"score") {
        let start = from + pos;
        from = start + 5;
        let mut i = from;
        let skip_ws = |i: &mut usize| {
            while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
                *i += 1;
            }
        };
        skip_ws(&mut i);
        if bytes.get(i) != Some(&b'=') {
            continue;
        }
        i += 1;
        skip_ws(&mut i);
        if bytes.get(i) == Some(&b'{') {
            i += 1;
            skip_ws(&mut i);
        }
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == digits_start {
            continue;
        }
        let decimal = bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit);
        if decimal {
            continue;
        }
        // digits are ASCII, so the slice is valid UTF-8
        return text[digits_start..i].parse::<i64>().ok().or(Some(i64::MAX));
    }
    None
}

pub fn parse_score(response: &str, scale: ScoreScale) -> Result<ParsedScore> {
    let value = find_score(response).ok_or_else(|| Error::Parse(response.to_string()))?;
    let score = i32::try_from(value).unwrap_or(i32::MAX);
    scale.check(score)?;
    Ok(ParsedScore { score, raw: response.to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(config: &LlmConfig, prompt: String) -> Self {
        ChatRequest {
            model: config.model.clone(),
            messages: alloc::vec![ChatMessage { role: "user".to_string(), content: prompt }],
            temperature: config.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

impl ChatResponse {
    pub fn content(&self) -> Option<&str> {
        self.choices.first().map(|c| c.message.content.as_str())
    }
}
