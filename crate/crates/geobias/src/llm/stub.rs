//! In-process model that answers like a chat endpoint, for hermetic runs.

use std::sync::atomic::{AtomicUsize, Ordering};

use geobias_core::stub::{answer_text, first_digit_distribution};
use serde_json::{json, Value};

use super::{BackendError, ChatBackend};
use crate::records::PromptRecord;

/// Text the stub returns when it declines to rate.
pub const REFUSAL: &str = "I cannot provide a rating for this location.";

type RatingFn = dyn Fn(&PromptRecord) -> Option<f64> + Send + Sync;

/// Answers each prompt with a rating chosen by a caller-supplied rule;
/// `None` from the rule produces a refusal.
pub struct StubBackend {
    model: String,
    supports_logprobs: bool,
    rule: Box<RatingFn>,
    calls: AtomicUsize,
}

impl StubBackend {
    pub fn new(
        model: impl Into<String>,
        supports_logprobs: bool,
        rule: impl Fn(&PromptRecord) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { model: model.into(), supports_logprobs, rule: Box::new(rule), calls: AtomicUsize::new(0) }
    }

    /// Completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn entry(token: &str, logprob: f64, top: Vec<Value>) -> Value {
    json!({ "token": token, "logprob": logprob, "top_logprobs": top })
}

/// Chat-completion response body for `rating`, tokenized as
/// `My| answer| is| |D|.|D|.` with the first-digit alternatives carrying the
/// stub's digit distribution.
pub fn completion_body(model: &str, prompt_id: &str, rating: Option<f64>, logprobs: bool) -> String {
    let text = rating.map_or_else(|| REFUSAL.to_string(), answer_text);
    let mut choice = json!({
        "index": 0,
        "message": { "role": "assistant", "content": text },
        "finish_reason": "stop",
    });
    if logprobs {
        let content: Vec<Value> = match rating {
            Some(r) => {
                let digits = first_digit_distribution(r);
                let shown = format!("{:.1}", r.clamp(0.0, 9.9));
                let (int, frac) = shown.split_once('.').expect("one decimal");
                let top: Vec<Value> = (0..10)
                    .filter(|d| digits[*d] > 0.0)
                    .map(|d| json!({ "token": d.to_string(), "logprob": digits[d].ln() }))
                    .collect();
                let shown_lp = int.parse::<usize>().ok().filter(|d| digits[*d] > 0.0).map_or(f64::MIN, |d| digits[d].ln());
                let mut v: Vec<Value> = ["My", " answer", " is", " "].iter().map(|t| entry(t, 0.0, vec![])).collect();
                v.push(entry(int, shown_lp, top));
                for t in [".", frac, "."] {
                    v.push(entry(t, 0.0, vec![]));
                }
                v
            }
            None => vec![entry(REFUSAL, 0.0, vec![])],
        };
        choice["logprobs"] = json!({ "content": content });
    }
    json!({
        "id": format!("stub-{prompt_id}"),
        "object": "chat.completion",
        "model": model,
        "choices": [choice],
    })
    .to_string()
}

impl ChatBackend for StubBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn supports_logprobs(&self) -> bool {
        self.supports_logprobs
    }

    fn complete(&self, prompt: &PromptRecord, logprobs: bool) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rating = (self.rule)(prompt);
        Ok(completion_body(&self.model, &prompt.id, rating, logprobs && self.supports_logprobs))
    }
}
