//! Querying models for ratings: backends, the response cache, retries and
//! bounded-parallel topic runs.

mod cache;
mod http;
mod stub;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use geobias_core::{expected_rating_from_logprobs, parse_rating, FirstDigitProbs, Location, RatingSeries};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use cache::{CachedResponse, ResponseCache};
pub use http::{HttpBackend, HttpEndpoint, TOP_LOGPROBS};
pub use stub::{completion_body, StubBackend, REFUSAL};

use crate::config::{RatingMode, RetryPolicy};
use crate::error::{Error, Result};
use crate::records::{PromptRecord, RatingSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Network failure, timeout, rate limit or server error; worth retrying.
    #[error("transient: {0}")]
    Transient(String),
    /// The endpoint rejected the request.
    #[error("rejected{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Permanent { status: Option<u16>, message: String },
}

/// A chat-completion endpoint. `complete` sends `prompt.text` as a single
/// user message and returns the raw response body.
pub trait ChatBackend: Send + Sync {
    fn model(&self) -> &str;
    fn supports_logprobs(&self) -> bool;
    fn complete(&self, prompt: &PromptRecord, logprobs: bool) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("model {model}: prompt {prompt_id}: {source}")]
    Permanent { model: String, prompt_id: String, source: BackendError },
    #[error("model {model}, {topic}: aborted after {failed} of {total} prompts failed; cached responses kept")]
    Aborted { model: String, topic: String, failed: usize, total: usize },
    #[error("model {model}, {topic}: {failed} of {total} prompts failed; rerun to resume from the cache")]
    Incomplete { model: String, topic: String, failed: usize, total: usize },
}

/// Rating extracted from one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingResponse {
    pub prompt_id: String,
    pub model: String,
    pub raw_text: String,
    pub parsed_rating: Option<f64>,
    /// Renormalized first-digit distribution, when logprobs were used.
    pub first_digit_probs: Option<[f64; 10]>,
    /// Digit probability mass before renormalization.
    pub digit_mass: Option<f64>,
    pub source: RatingSource,
    pub attempts: u32,
    pub from_cache: bool,
}

impl RatingResponse {
    pub fn answered(&self) -> bool {
        self.parsed_rating.is_some()
    }
}

/// Answer text and first-digit alternatives of a chat-completion body.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub first_digit: Option<FirstDigitProbs>,
}

/// Reads an OpenAI-format chat-completion body. The first-digit position is
/// the first generated token whose text starts with an ASCII digit. Bodies
/// that are not JSON, or lack a message, give empty text.
pub fn parse_completion(body: &str) -> Completion {
    let Ok(v) = serde_json::from_str::<Value>(body) else {
        return Completion { text: String::new(), first_digit: None };
    };
    let choice = &v["choices"][0];
    let text = choice["message"]["content"].as_str().unwrap_or("").to_string();
    let first_digit = choice["logprobs"]["content"].as_array().and_then(|tokens| {
        let pos = tokens.iter().find(|t| {
            t["token"].as_str().and_then(|s| s.trim_start().chars().next()).is_some_and(|c| c.is_ascii_digit())
        })?;
        let alts: Vec<(&str, f64)> = match pos["top_logprobs"].as_array() {
            Some(top) if !top.is_empty() => {
                top.iter().filter_map(|a| Some((a["token"].as_str()?, a["logprob"].as_f64()?))).collect()
            }
            _ => vec![(pos["token"].as_str()?, pos["logprob"].as_f64()?)],
        };
        Some(FirstDigitProbs::from_logprobs(alts))
    });
    Completion { text, first_digit }
}

/// Turns a raw body into a rating under `mode`.
///
/// Expected-value mode uses the first-digit distribution unless it is
/// missing or carries at most half the probability mass, in which case the
/// answer text is parsed instead.
pub fn interpret(model: &str, prompt_id: &str, body: &str, mode: RatingMode, attempts: u32) -> RatingResponse {
    let c = parse_completion(body);
    let mut r = RatingResponse {
        prompt_id: prompt_id.to_string(),
        model: model.to_string(),
        raw_text: c.text,
        parsed_rating: None,
        first_digit_probs: None,
        digit_mass: None,
        source: RatingSource::None,
        attempts,
        from_cache: false,
    };
    let text_rating = parse_rating(&r.raw_text);
    match mode {
        RatingMode::Greedy => {
            r.parsed_rating = text_rating;
            r.source = if text_rating.is_some() { RatingSource::Text } else { RatingSource::None };
        }
        RatingMode::Ev => {
            let ev = c.first_digit.as_ref().map(|p| (p.mass(), expected_rating_from_logprobs(p)));
            if let Some((mass, _)) = &ev {
                r.digit_mass = Some(*mass);
            }
            match ev {
                Some((_, Ok(e))) if !e.low_mass => {
                    let probs = c.first_digit.expect("checked above");
                    r.first_digit_probs = Some(probs.0.map(|p| p / e.digit_mass));
                    r.parsed_rating = Some(e.value);
                    r.source = RatingSource::Logprobs;
                }
                _ => {
                    r.parsed_rating = text_rating;
                    r.source = if text_rating.is_some() { RatingSource::TextFallback } else { RatingSource::None };
                }
            }
        }
    }
    r
}

/// Why a single query failed.
#[derive(Debug, Error)]
pub enum QueryError {
    #[error("failed after {attempts} attempts: {message}")]
    Transient { attempts: u32, message: String },
    #[error(transparent)]
    Permanent(BackendError),
    #[error(transparent)]
    Cache(Error),
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Rating for one prompt, from the cache when present, otherwise from the
/// backend with retries. The raw body is cached before it is parsed.
pub fn query_model(
    backend: &dyn ChatBackend,
    prompt: &PromptRecord,
    mode: RatingMode,
    retry: &RetryPolicy,
    cache: &ResponseCache,
) -> Result<RatingResponse, QueryError> {
    let model = backend.model();
    if let Some(hit) = cache.get(model, &prompt.id) {
        let mut r = interpret(model, &prompt.id, &hit.body, mode, hit.attempts);
        r.from_cache = true;
        return Ok(r);
    }
    let logprobs = mode == RatingMode::Ev;
    let mut last = String::new();
    for attempt in 1..=retry.max_attempts {
        match backend.complete(prompt, logprobs) {
            Ok(body) => {
                let entry = CachedResponse {
                    model: model.to_string(),
                    prompt_id: prompt.id.clone(),
                    attempts: attempt,
                    received_unix_ms: now_ms(),
                    body,
                };
                cache.insert(entry.clone()).map_err(QueryError::Cache)?;
                return Ok(interpret(model, &prompt.id, &entry.body, mode, attempt));
            }
            Err(BackendError::Transient(msg)) => {
                warn!("{model}: prompt {} attempt {attempt}: {msg}", prompt.id);
                last = msg;
                if attempt < retry.max_attempts {
                    std::thread::sleep(Duration::from_millis(retry.delay_ms(attempt as usize - 1)));
                }
            }
            Err(e @ BackendError::Permanent { .. }) => return Err(QueryError::Permanent(e)),
        }
    }
    Err(QueryError::Transient { attempts: retry.max_attempts, message: last })
}

/// Ratings of one model over one topic's prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicRun {
    pub series: RatingSeries,
    /// Aligned to the input prompts.
    pub responses: Vec<RatingResponse>,
    /// Prompts that were not served from the cache.
    pub network_queries: usize,
}

/// Queries every prompt with at most `max_in_flight` requests in flight.
///
/// Cached prompts are not re-sent. The run aborts once more than half of
/// the prompts have failed after retries, and stops at the first permanent
/// rejection; in both cases everything already received stays cached.
pub fn run_topic(
    backend: &dyn ChatBackend,
    prompts: &[PromptRecord],
    mode: RatingMode,
    retry: &RetryPolicy,
    max_in_flight: usize,
    cache: &ResponseCache,
) -> Result<TopicRun> {
    let model = backend.model().to_string();
    let Some(first) = prompts.first() else {
        return Err(RunError::Config(format!("model {model}: no prompts to run")).into());
    };
    if mode == RatingMode::Ev && !backend.supports_logprobs() {
        return Err(RunError::Config(format!("model {model}: expected-value mode needs logprobs support")).into());
    }
    if let Some(p) = prompts.iter().find(|p| p.topic != first.topic) {
        return Err(Error::data(format!("mixed topics in one run: {:?} and {:?}", first.topic, p.topic)));
    }
    let locations = prompts
        .iter()
        .map(|p| Location::new(p.lat, p.lon).map_err(|e| Error::data(format!("prompt {}: {e}", p.id))))
        .collect::<Result<Vec<_>>>()?;

    let total = prompts.len();
    let next = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let network = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let fatal: Mutex<Option<Error>> = Mutex::new(None);
    let results: Mutex<Vec<Option<RatingResponse>>> = Mutex::new(vec![None; total]);

    std::thread::scope(|s| {
        for _ in 0..max_in_flight.clamp(1, total) {
            s.spawn(|| {
                while !stop.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(p) = prompts.get(i) else { break };
                    match query_model(backend, p, mode, retry, cache) {
                        Ok(r) => {
                            if !r.from_cache {
                                network.fetch_add(1, Ordering::SeqCst);
                            }
                            results.lock().unwrap()[i] = Some(r);
                        }
                        Err(QueryError::Transient { .. }) => {
                            network.fetch_add(1, Ordering::SeqCst);
                            if 2 * (failed.fetch_add(1, Ordering::SeqCst) + 1) > total {
                                stop.store(true, Ordering::SeqCst);
                            }
                        }
                        Err(QueryError::Permanent(source)) => {
                            let e = RunError::Permanent { model: model.clone(), prompt_id: p.id.clone(), source };
                            fatal.lock().unwrap().get_or_insert(e.into());
                            stop.store(true, Ordering::SeqCst);
                        }
                        Err(QueryError::Cache(e)) => {
                            fatal.lock().unwrap().get_or_insert(e);
                            stop.store(true, Ordering::SeqCst);
                        }
                    }
                }
            });
        }
    });

    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(e);
    }
    let failed = failed.into_inner();
    let topic = first.topic.clone();
    if 2 * failed > total {
        return Err(RunError::Aborted { model, topic, failed, total }.into());
    }
    if failed > 0 {
        return Err(RunError::Incomplete { model, topic, failed, total }.into());
    }
    let responses: Vec<RatingResponse> =
        results.into_inner().unwrap().into_iter().map(|r| r.expect("every prompt answered")).collect();
    let ratings = responses.iter().map(|r| r.parsed_rating).collect();
    let series = RatingSeries::new(topic, model, locations, ratings).expect("aligned by construction");
    let network_queries = network.into_inner();
    info!(
        "{} / {}: answer rate {:.3} over {} prompts ({} sent)",
        series.model,
        series.topic,
        series.answer_rate(),
        total,
        network_queries
    );
    Ok(TopicRun { series, responses, network_queries })
}
