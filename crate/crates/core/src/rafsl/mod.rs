//! Retrieval-augmented few-shot prompting over a corpus of lifted NL/LTL
//! pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::ltl::{atoms, parse, placeholder};

mod embed;
mod index;
mod prompt;

pub use embed::{cosine, BuiltinEmbedder, Embedder, Embedding, RemoteEmbedder, BUILTIN_DIMENSION};
pub use index::{build_index, corpus_hash, RetrievalIndex};
pub use prompt::{assemble_prompt, SYSTEM_PROMPT};

pub const DEFAULT_K: usize = 3;

/// The corpus shipped with the crate.
pub const SHIPPED_CORPUS: &str = include_str!("../../assets/corpus.jsonl");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RafslError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("pair {index}: {reason}")]
    InvalidPair { index: usize, reason: String },
    #[error("pair {index} duplicates pair {first}")]
    Duplicate { index: usize, first: usize },
    #[error("corpus line {line}: {message}")]
    CorpusLine { line: usize, message: String },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider `{got}` does not match index provider `{expected}`")]
    ProviderMismatch { expected: String, got: String },
    #[error("embedding dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding: {0}")]
    Embedding(#[from] BackendError),
    #[error("index cache: {0}")]
    Cache(String),
    #[error("{0}")]
    Io(String),
}

/// An example pair whose atoms are the placeholders `atom_1 … atom_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedPair {
    pub nl: String,
    pub ltl: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub source: String,
    /// 1-based line of the pair this one rephrases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase_of: Option<usize>,
}

fn placeholder_words(nl: &str) -> Vec<&str> {
    nl.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| {
            w.strip_prefix("atom_")
                .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
        })
        .collect()
}

impl LiftedPair {
    /// Checks the lifting discipline: `ltl` parses, its atoms are
    /// `atom_1 … atom_n` in first-occurrence order, and the NL text names
    /// exactly those placeholders.
    pub fn validate(&self) -> Result<(), String> {
        if self.nl.trim().is_empty() {
            return Err("empty NL text".into());
        }
        let f = parse(&self.ltl).map_err(|d| format!("LTL does not parse: {d}"))?;
        let found = atoms(&f);
        for (i, a) in found.iter().enumerate() {
            let want = placeholder(i + 1);
            if *a != want {
                return Err(format!("atom `{a}` found where `{want}` was expected"));
            }
        }
        let words = placeholder_words(&self.nl);
        for a in &found {
            if !words.contains(&a.as_str()) {
                return Err(format!("`{a}` does not appear in the NL text"));
            }
        }
        if let Some(w) = words.iter().find(|w| !found.iter().any(|a| a == *w)) {
            return Err(format!("NL placeholder `{w}` is not used by the formula"));
        }
        Ok(())
    }
}

/// Reads a JSON Lines corpus. Blank lines are skipped but still counted for
/// `paraphrase_of` line references.
pub fn load_corpus(text: &str) -> Result<Vec<LiftedPair>, RafslError> {
    let mut pairs = Vec::new();
    let mut line_of = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: LiftedPair = serde_json::from_str(line).map_err(|e| RafslError::CorpusLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
        line_of.push(i + 1);
    }
    for (i, p) in pairs.iter().enumerate() {
        if let Some(target) = p.paraphrase_of {
            if target == line_of[i] || !line_of.contains(&target) {
                return Err(RafslError::CorpusLine {
                    line: line_of[i],
                    message: format!(
                        "paraphrase_of refers to line {target}, which holds no other pair"
                    ),
                });
            }
        }
    }
    Ok(pairs)
}

pub fn load_corpus_file(path: &std::path::Path) -> Result<Vec<LiftedPair>, RafslError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RafslError::Io(format!("{}: {e}", path.display())))?;
    load_corpus(&text)
}

pub fn shipped_corpus() -> Vec<LiftedPair> {
    load_corpus(SHIPPED_CORPUS).expect("shipped corpus is well-formed")
}
