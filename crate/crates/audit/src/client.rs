//! Chat-completions client with retries and bounded concurrency.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use essay_audit_core::llm::{parse_score, ChatRequest, ChatResponse, LlmConfig, ScoringStrategy};
use essay_audit_core::{PredictionRecord, ScoreScale};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. Errors are connection-level failures; HTTP error
/// statuses come back as responses.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &str, bearer: Option<&str>, timeout: Duration) -> Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        UreqTransport { agent: ureq::Agent::new_with_config(config) }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, body: &str, bearer: Option<&str>, _timeout: Duration) -> Result<HttpResponse, String> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssayFailure {
    pub essay_id: String,
    pub attempts: u32,
    /// Outermost error first.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEssay {
    pub prediction: PredictionRecord,
    pub retries: u32,
}

/// Essay to score, with its human score for the resulting record.
#[derive(Debug, Clone)]
pub struct EssayInput<'a> {
    pub essay_id: &'a str,
    pub text: &'a str,
    pub true_score: i32,
}

#[derive(Debug, Default)]
pub struct UsageTally {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
    pub failures: AtomicU64,
    pub latency_ms: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UsageSummary {
    pub requests: u64,
    pub retries: u64,
    pub failures: u64,
    pub latency_ms: u64,
}

impl UsageTally {
    pub fn snapshot(&self) -> UsageSummary {
        UsageSummary {
            requests: self.requests.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
            latency_ms: self.latency_ms.load(Ordering::Relaxed),
        }
    }
}

pub struct LlmClient {
    pub config: LlmConfig,
    transport: Box<dyn Transport>,
    api_key: Option<String>,
    pub tally: UsageTally,
    sleep: fn(Duration),
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl LlmClient {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: LlmConfig) -> Self {
        let transport = Box::new(UreqTransport::new(Duration::from_millis(config.timeout_ms)));
        let api_key = std::env::var(&config.api_key_env).ok();
        LlmClient { config, transport, api_key, tally: UsageTally::default(), sleep: std::thread::sleep }
    }

    pub fn with_transport(config: LlmConfig, transport: Box<dyn Transport>, api_key: Option<String>) -> Self {
        LlmClient { config, transport, api_key, tally: UsageTally::default(), sleep: std::thread::sleep }
    }

    /// Replaces the backoff sleep, e.g. with a no-op in tests.
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.backoff_base_ms.saturating_mul(1u64 << attempt.min(16)))
    }

    /// Sends the prompt, retrying transport failures, 429 and 5xx. Returns
    /// the response text and the number of retries used.
    pub fn complete(&self, prompt: String) -> Result<(String, u32), (u32, Vec<String>)> {
        let body = serde_json::to_string(&ChatRequest::new(&self.config, prompt)).expect("request serializes");
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut errors = Vec::new();
        let mut attempt = 0u32;
        loop {
            self.tally.requests.fetch_add(1, Ordering::Relaxed);
            let start = Instant::now();
            let result = self.transport.post_json(&self.config.endpoint, &body, self.api_key.as_deref(), timeout);
            self.tally.latency_ms.fetch_add(start.elapsed().as_millis() as u64, Ordering::Relaxed);
            let retry = match result {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return match serde_json::from_str::<ChatResponse>(&resp.body) {
                        Ok(parsed) => match parsed.content() {
                            Some(text) => Ok((text.to_string(), attempt)),
                            None => Err((attempt + 1, vec!["response has no choices".to_string()])),
                        },
                        Err(e) => Err((attempt + 1, vec![format!("malformed response body: {e}")])),
                    };
                }
                Ok(resp) => {
                    errors.push(format!("HTTP {}: {}", resp.status, resp.body.chars().take(200).collect::<String>()));
                    retryable(resp.status)
                }
                Err(e) => {
                    errors.push(format!("transport: {e}"));
                    true
                }
            };
            if !retry || attempt >= self.config.max_retries {
                errors.reverse();
                return Err((attempt + 1, errors));
            }
            (self.sleep)(self.backoff(attempt));
            attempt += 1;
            self.tally.retries.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Scores one essay. Parse and range errors fail the essay without retry.
    pub fn score_essay(
        &self,
        strategy: &ScoringStrategy,
        essay: &EssayInput<'_>,
        scale: ScoreScale,
    ) -> Result<ScoredEssay, EssayFailure> {
        let fail = |attempts: u32, errors: Vec<String>| {
            self.tally.failures.fetch_add(1, Ordering::Relaxed);
            EssayFailure { essay_id: essay.essay_id.to_string(), attempts, errors }
        };
        let prompt = strategy.build_prompt(essay.text, scale).map_err(|e| fail(0, vec![e.to_string()]))?;
        let (text, retries) = self.complete(prompt).map_err(|(a, errs)| fail(a, errs))?;
        let parsed = parse_score(&text, scale).map_err(|e| fail(retries + 1, vec![e.to_string()]))?;
        let mut prediction = PredictionRecord::new(essay.essay_id, essay.true_score, parsed.score);
        prediction.rationale = Some(parsed.raw);
        Ok(ScoredEssay { prediction, retries })
    }

    /// Scores a batch with at most `max_in_flight` concurrent requests.
    /// Output order follows input order.
    pub fn score_batch(
        &self,
        strategy: &ScoringStrategy,
        essays: &[EssayInput<'_>],
        scale: ScoreScale,
    ) -> Vec<Result<ScoredEssay, EssayFailure>> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<ScoredEssay, EssayFailure>>>> = Mutex::new(vec![None; essays.len()]);
        let workers = self.config.max_in_flight.max(1).min(essays.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= essays.len() {
                        break;
                    }
                    let r = self.score_essay(strategy, &essays[i], scale);
                    slots.lock().expect("no panics while holding the lock")[i] = Some(r);
                });
            }
        });
        slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every slot filled")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    /// Replays scripted responses in order, repeating the last one.
    struct Scripted {
        script: Vec<Result<HttpResponse, String>>,
        calls: AtomicU32,
    }

    impl Transport for Scripted {
        fn post_json(&self, _: &str, body: &str, _: Option<&str>, _: Duration) -> Result<HttpResponse, String> {
            assert!(body.contains("\"temperature\":0.2"));
            let i = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            self.script[i.min(self.script.len() - 1)].clone()
        }
    }

    fn ok(content: &str) -> Result<HttpResponse, String> {
        let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]});
        Ok(HttpResponse { status: 200, body: body.to_string() })
    }

    fn status(code: u16) -> Result<HttpResponse, String> {
        Ok(HttpResponse { status: code, body: "slow down".into() })
    }

    fn client(script: Vec<Result<HttpResponse, String>>) -> LlmClient {
        let t = Scripted { script, calls: AtomicU32::new(0) };
        LlmClient::with_transport(LlmConfig::default(), Box::new(t), None).with_sleep(|_| {})
    }

    fn strategy() -> ScoringStrategy {
        ScoringStrategy::ZeroShot { rubric: "Rubric.".into() }
    }

    fn scale() -> ScoreScale {
        ScoreScale::new(1, 6).unwrap()
    }

    const ESSAY: EssayInput<'static> = EssayInput { essay_id: "e1", text: "An essay.", true_score: 3 };

    #[test]
    fn happy_path() {
        let c = client(vec![ok("score = 4")]);
        let r = c.score_essay(&strategy(), &ESSAY, scale()).unwrap();
        assert_eq!(r.prediction.predicted_score, 4);
        assert_eq!(r.prediction.rationale.as_deref(), Some("score = 4"));
        assert_eq!(r.prediction.confidence, None);
        assert_eq!(r.retries, 0);
    }

    #[test]
    fn retries_after_429() {
        let c = client(vec![status(429), ok("Predicted score = 3.")]);
        let r = c.score_essay(&strategy(), &ESSAY, scale()).unwrap();
        assert_eq!(r.retries, 1);
        assert_eq!(c.tally.retries.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn exhaustion_keeps_the_chain() {
        let c = client(vec![Err("connection refused".into()), status(503)]);
        let f = c.score_essay(&strategy(), &ESSAY, scale()).unwrap_err();
        assert_eq!(f.attempts, 4);
        assert_eq!(f.errors.len(), 4);
        assert!(f.errors.last().unwrap().contains("connection refused"));
    }

    #[test]
    fn client_errors_and_parse_errors_are_not_retried() {
        let c = client(vec![status(400)]);
        assert_eq!(c.score_essay(&strategy(), &ESSAY, scale()).unwrap_err().attempts, 1);
        let c = client(vec![ok("I cannot grade this.")]);
        let f = c.score_essay(&strategy(), &ESSAY, scale()).unwrap_err();
        assert_eq!(f.attempts, 1);
        assert!(f.errors[0].contains("could not find a score"));
        assert_eq!(c.tally.requests.load(Ordering::Relaxed), 1);
    }

    /// Answers with the essay's own number so misordering would show.
    struct Echo;

    impl Transport for Echo {
        fn post_json(&self, _: &str, body: &str, _: Option<&str>, _: Duration) -> Result<HttpResponse, String> {
            let n = body.split("Essay number ").nth(1).unwrap().chars().next().unwrap();
            std::thread::sleep(Duration::from_millis(u64::from(7 - n.to_digit(10).unwrap())));
            ok(&format!("score = {n}"))
        }
    }

    #[test]
    fn batch_preserves_order() {
        let texts: Vec<String> = (1..=6).map(|k| format!("Essay number {k}.")).collect();
        let ids: Vec<String> = (1..=6).map(|k| format!("e{k}")).collect();
        let essays: Vec<EssayInput> =
            texts.iter().zip(&ids).map(|(t, id)| EssayInput { essay_id: id, text: t, true_score: 1 }).collect();
        let c = LlmClient::with_transport(LlmConfig { max_in_flight: 3, ..Default::default() }, Box::new(Echo), None);
        let out = c.score_batch(&strategy(), &essays, scale());
        let scores: Vec<i32> = out.iter().map(|r| r.as_ref().unwrap().prediction.predicted_score).collect();
        assert_eq!(scores, [1, 2, 3, 4, 5, 6]);
    }
}
