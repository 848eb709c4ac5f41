//! Chat-completions client. The wire layer sits behind [`Transport`] so tests
//! can replay recorded responses without touching the network.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, Capability, GenParams, Prompt};

pub const ENV_ENDPOINT: &str = "LTLGUARD_ENDPOINT";
pub const ENV_MODEL: &str = "LTLGUARD_MODEL";
pub const ENV_API_KEY: &str = "LTLGUARD_API_KEY";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportError {
    Io(String),
    Timeout,
    /// A replay transport has no recording for this request.
    Missing(String),
}

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
    ) -> Result<HttpResponse, TransportError>;
}

/// Hex SHA-256 of the request body's canonical (sorted-key) JSON text.
pub fn request_hash(body: &Value) -> String {
    hex::encode(Sha256::digest(body.to_string().as_bytes()))
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.post(url);
        if let Some(key) = api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Deserialize)]
struct Recording {
    request_hash: String,
    response_body: Value,
    #[serde(default = "ok_status")]
    status: u16,
}

fn ok_status() -> u16 {
    200
}

/// Replays responses from JSON Lines of `{request_hash, response_body}`.
#[derive(Default)]
pub struct RecordedTransport {
    responses: HashMap<String, HttpResponse>,
}

impl RecordedTransport {
    pub fn from_jsonl(text: &str) -> Result<Self, BackendError> {
        let mut responses = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Recording = serde_json::from_str(line)
                .map_err(|e| BackendError::Config(format!("fixture line {}: {e}", i + 1)))?;
            let body = match rec.response_body {
                Value::String(s) => s,
                other => other.to_string(),
            };
            responses.insert(
                rec.request_hash,
                HttpResponse {
                    status: rec.status,
                    body,
                },
            );
        }
        Ok(RecordedTransport { responses })
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn insert(&mut self, hash: String, response: HttpResponse) {
        self.responses.insert(hash, response);
    }
}

impl Transport for RecordedTransport {
    fn post_json(
        &self,
        _url: &str,
        _api_key: Option<&str>,
        body: &Value,
    ) -> Result<HttpResponse, TransportError> {
        let hash = request_hash(body);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(TransportError::Missing(hash))
    }
}

/// Full-text-only backend speaking the chat-completions protocol.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    pub retries: u32,
    pub backoff: Duration,
}

impl HttpBackend {
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key: Option<String>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, BackendError> {
        let endpoint = endpoint.trim().trim_end_matches('/');
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://"))
            || endpoint.len() <= "https://".len()
        {
            return Err(BackendError::Config(format!(
                "endpoint `{endpoint}` must be an http(s) URL"
            )));
        }
        if model.trim().is_empty() {
            return Err(BackendError::Config("model name is empty".into()));
        }
        if matches!(&api_key, Some(k) if k.trim().is_empty() || k.contains(char::is_whitespace)) {
            return Err(BackendError::Config(
                "API key is blank or contains whitespace".into(),
            ));
        }
        Ok(HttpBackend {
            endpoint: endpoint.to_string(),
            model: model.trim().to_string(),
            api_key,
            transport,
            retries: 2,
            backoff: Duration::from_millis(250),
        })
    }

    /// Reads `LTLGUARD_ENDPOINT`, `LTLGUARD_MODEL` and `LTLGUARD_API_KEY`.
    pub fn from_env(transport: Arc<dyn Transport>) -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| BackendError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| BackendError::Config(format!("{ENV_MODEL} is not set")))?;
        let key = std::env::var(ENV_API_KEY).ok();
        Self::new(&endpoint, &model, key, transport)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn request_body(&self, prompt: &Prompt, params: &GenParams) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if params.temperature > 0.0 {
            body["seed"] = json!(params.seed);
        }
        body
    }

    /// POSTs `body` to `{endpoint}/{path}`, retrying transport failures,
    /// timeouts and 5xx responses; 4xx responses are returned immediately.
    pub fn post(&self, path: &str, body: &Value) -> Result<String, BackendError> {
        let url = format!("{}/{}", self.endpoint, path);
        let mut attempt = 0;
        loop {
            let outcome = self
                .transport
                .post_json(&url, self.api_key.as_deref(), body);
            let retryable = match &outcome {
                Ok(r) if r.status < 400 => return Ok(r.body.clone()),
                Ok(r) if r.status < 500 => false,
                Ok(_) => true,
                Err(TransportError::Missing(_)) => false,
                Err(_) => true,
            };
            if !retryable || attempt >= self.retries {
                return Err(match outcome {
                    Ok(r) => BackendError::Http {
                        status: r.status,
                        body: r.body,
                        retries: attempt,
                    },
                    Err(TransportError::Timeout) => BackendError::Timeout { retries: attempt },
                    Err(TransportError::Io(message)) => BackendError::Transport {
                        message,
                        retries: attempt,
                    },
                    Err(TransportError::Missing(h)) => BackendError::MissingFixture(h),
                });
            }
            std::thread::sleep(self.backoff * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}

fn first_choice_content(body: &str) -> Result<String, BackendError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn capability(&self) -> Capability {
        Capability {
            full_text: true,
            step_wise: false,
            vocabulary: None,
        }
    }

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        let body = self.request_body(prompt, params);
        first_choice_content(&self.post("chat/completions", &body)?)
    }
}
