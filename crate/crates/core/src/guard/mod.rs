//! Grammar-constrained generation: prefix recognizer, vocabulary masks,
//! strict decoding and the parse-error repair loop.

use thiserror::Error;

use crate::backend::BackendError;

mod generate;
mod mask;
mod recognizer;
mod repair;

pub use generate::{constrained_generate, Generated};
pub use mask::{build_mask_store, grammar_hash, MaskStore, TokenId, Vocabulary};
pub use recognizer::{classify, Classification, Lexeme, RecognizerState};
pub use repair::{
    is_sentinel, normalize_output, parse_output, repair_loop, repair_prompt, Attempt, RepairOutcome,
};

/// Reply a model gives for text that is not a requirement.
pub const SENTINEL: &str = "The provided text has nothing to do with LTL";

/// Default number of pre-computed recognizer states.
pub const DEFAULT_STATE_BUDGET: usize = 4_096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuardError {
    #[error("no vocabulary token can extend `{prefix}`")]
    DeadEnd { prefix: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("token {0} has no bytes")]
    EmptyToken(TokenId),
    #[error("backend vocabulary does not match the mask store")]
    VocabularyMismatch,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("mask cache: {0}")]
    Cache(String),
    #[error("internal: {0}")]
    Internal(String),
}
