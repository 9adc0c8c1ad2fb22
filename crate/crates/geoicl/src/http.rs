//! JSON-over-HTTP clients for the model backend and the paraphrase service.
//!
//! Wire contracts:
//!
//! - `POST {base}/generate` with `{prompt, image_b64, max_new_tokens}`,
//!   answered by `{text}`.
//! - `POST {base}/paraphrase` with `{text, n, lang}`, answered by
//!   `{variants: [...]}`.
//!
//! Transport failures, timeouts, `429` and `5xx` responses are retried with
//! exponential backoff. Other statuses fail immediately.

use std::thread;
use std::time::Duration;

use geoicl_core::augment::{ClientError, ParaphraseRequest, ParaphraseResponse, Paraphraser};
use geoicl_core::compose::MetaSample;
use geoicl_core::eval::{Backend, BackendError, MAX_NEW_TOKENS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::png;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmRequest {
    pub prompt: String,
    pub image_b64: String,
    pub max_new_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmResponse {
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub timeout_secs: f64,
    /// Extra attempts after the first.
    pub retries: u32,
    /// Delay before the first retry; doubles each time.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { timeout_secs: 60.0, retries: 3, backoff_ms: 200 }
    }
}

enum Failure {
    Transient(String),
    Permanent(String),
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: Agent,
    base_url: String,
    policy: RetryPolicy,
}

impl JsonClient {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Self {
        let timeout = Duration::from_secs_f64(policy.timeout_secs.max(0.001));
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, base_url: base_url.trim_end_matches('/').to_string(), policy }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(&self, url: &str, body: &Req) -> Result<Resp, Failure> {
        let mut resp = self.agent.post(url).send_json(body).map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Failure::Permanent(format!("HTTP {status}: {}", detail.trim())));
        }
        resp.body_mut().read_json::<Resp>().map_err(|e| Failure::Permanent(format!("bad response body: {e}")))
    }

    /// POST `body` to `{base}{path}` and decode the JSON reply.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, String> {
        let url = format!("{}{path}", self.base_url);
        let mut delay = Duration::from_millis(self.policy.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&url, body) {
                Ok(r) => return Ok(r),
                Err(Failure::Permanent(e)) => return Err(format!("{url}: {e}")),
                Err(Failure::Transient(e)) if attempt >= self.policy.retries => {
                    return Err(format!("{url}: {e} (after {} attempts)", attempt + 1))
                }
                Err(Failure::Transient(e)) => {
                    log::warn!("{url}: {e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }
}

/// Model backend reached over HTTP.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: JsonClient,
}

impl HttpBackend {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Self {
        Self { client: JsonClient::new(base_url, policy) }
    }
}

impl Backend for HttpBackend {
    fn generate(&self, sample: &MetaSample, max_new_tokens: u32) -> Result<String, BackendError> {
        let image_b64 = png::to_base64(&sample.merged_image).map_err(|e| BackendError(e.to_string()))?;
        let request = LmmRequest { prompt: sample.prompt.clone(), image_b64, max_new_tokens: max_new_tokens.min(MAX_NEW_TOKENS) };
        self.client.post::<_, LmmResponse>("/generate", &request).map(|r| r.text).map_err(BackendError)
    }
}

/// Paraphrase service reached over HTTP.
#[derive(Debug, Clone)]
pub struct HttpParaphraser {
    client: JsonClient,
}

impl HttpParaphraser {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Self {
        Self { client: JsonClient::new(base_url, policy) }
    }
}

impl Paraphraser for HttpParaphraser {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<ParaphraseResponse, ClientError> {
        self.client.post("/paraphrase", request).map_err(ClientError)
    }
}
