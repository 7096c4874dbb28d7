//! OpenAI-style chat-completion endpoint.

use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{BackendError, ChatBackend};
use crate::records::PromptRecord;

pub struct HttpBackend {
    model: String,
    remote_model: String,
    url: String,
    api_key: Option<String>,
    supports_logprobs: bool,
    payload: Map<String, Value>,
    agent: ureq::Agent,
}

/// Number of alternatives requested at each token position.
pub const TOP_LOGPROBS: u32 = 10;

/// Connection settings for [`HttpBackend::new`].
#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    pub model: String,
    pub base_url: String,
    pub path: String,
    /// Identifier sent in the request; defaults to `model`.
    pub remote_model: Option<String>,
    pub api_key: Option<String>,
    pub supports_logprobs: bool,
    pub timeout: Duration,
    pub payload: Map<String, Value>,
}

impl HttpBackend {
    pub fn new(ep: HttpEndpoint) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(ep.timeout)).build().into();
        let url = format!("{}/{}", ep.base_url.trim_end_matches('/'), ep.path.trim_start_matches('/'));
        Self {
            remote_model: ep.remote_model.unwrap_or_else(|| ep.model.clone()),
            model: ep.model,
            url,
            api_key: ep.api_key,
            supports_logprobs: ep.supports_logprobs,
            payload: ep.payload,
            agent,
        }
    }

    /// Request body: the configured payload with the message, model,
    /// temperature and logprob fields set on top.
    pub fn request_body(&self, text: &str, logprobs: bool) -> Value {
        let mut body = self.payload.clone();
        body.insert("model".into(), json!(self.remote_model));
        body.insert("messages".into(), json!([{ "role": "user", "content": text }]));
        body.insert("temperature".into(), json!(0.0));
        if logprobs {
            body.insert("logprobs".into(), json!(true));
            body.insert("top_logprobs".into(), json!(TOP_LOGPROBS));
        }
        Value::Object(body)
    }
}

impl ChatBackend for HttpBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn supports_logprobs(&self) -> bool {
        self.supports_logprobs
    }

    fn complete(&self, prompt: &PromptRecord, logprobs: bool) -> Result<String, BackendError> {
        let body = self.request_body(&prompt.text, logprobs).to_string();
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(&body).map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transient(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            408 | 429 | 500..=599 => Err(BackendError::Transient(format!("HTTP {status}: {}", snippet(&text)))),
            _ => Err(BackendError::Permanent { status: Some(status), message: snippet(&text) }),
        }
    }
}

fn snippet(s: &str) -> String {
    let s = s.trim();
    match s.char_indices().nth(200) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
