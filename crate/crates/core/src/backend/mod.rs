//! Language-model access: full-text completion for every backend, step-wise
//! next-token scores for the ones that can expose them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::guard::{TokenId, Vocabulary};

mod http;
mod mock;

pub use http::{
    request_hash, HttpBackend, HttpResponse, RecordedTransport, Transport, TransportError,
    UreqTransport, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use mock::{
    default_vocabulary, Matcher, MockBackend, MockRule, MockScript, StepPolicy, StepScript,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptPurpose {
    #[default]
    Translate,
    Repair,
    Conflict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub variant: Option<String>,
    pub seed: u64,
    pub purpose: PromptPurpose,
}

/// A system message plus a user message. `requirements` lists the raw
/// requirement texts the user message asks about.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    pub requirements: Vec<String>,
    pub meta: PromptMeta,
}

impl Prompt {
    /// Hex SHA-256 over the system and user text.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system.as_bytes());
        h.update([0u8]);
        h.update(self.user.as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_tokens: 256,
            temperature: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NextToken {
    Token(TokenId),
    End,
}

#[derive(Clone, Debug)]
pub struct Capability {
    pub full_text: bool,
    pub step_wise: bool,
    pub vocabulary: Option<Arc<Vocabulary>>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BackendError {
    #[error("transport failure after {retries} retries: {message}")]
    Transport { message: String, retries: u32 },
    #[error("request timed out after {retries} retries")]
    Timeout { retries: u32 },
    #[error("HTTP status {status} after {retries} retries: {body}")]
    Http {
        status: u16,
        body: String,
        retries: u32,
    },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend does not support step-wise decoding")]
    UnsupportedCapability,
    #[error("mock script has no reply for this prompt")]
    ScriptExhausted,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("no recorded response for request {0}")]
    MissingFixture(String),
}

pub trait Backend: Send + Sync {
    fn capability(&self) -> Capability;

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError>;

    /// Candidates for the next token after `generated`, best first; includes
    /// [`NextToken::End`].
    fn next_token_distribution(
        &self,
        _prompt: &Prompt,
        _generated: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        Err(BackendError::UnsupportedCapability)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn capability(&self) -> Capability {
        (**self).capability()
    }

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }

    fn next_token_distribution(
        &self,
        prompt: &Prompt,
        generated: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        (**self).next_token_distribution(prompt, generated)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn capability(&self) -> Capability {
        (**self).capability()
    }

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }

    fn next_token_distribution(
        &self,
        prompt: &Prompt,
        generated: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        (**self).next_token_distribution(prompt, generated)
    }
}
