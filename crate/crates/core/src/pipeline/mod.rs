//! End-to-end translation: prompt assembly, retrieval, generation, repair
//! and joint consistency checking with conflict feedback.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::CheckError;
use crate::guard::Attempt;
use crate::ltl::LassoTrace;
use crate::rafsl::{Embedder, LiftedPair, RafslError, RetrievalIndex};

mod translate;

pub use translate::{conflict_feedback_prompt, Pipeline};

pub const REPORT_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
}

/// Which of the four components a run enables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    /// Grammar in the system prompt.
    pub grammar: bool,
    /// Mask-constrained decoding.
    pub strict: bool,
    /// Retrieved few-shot examples.
    pub retrieval: bool,
    /// Parse-error feedback.
    pub feedback: bool,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::V1,
        Variant::V2,
        Variant::V3,
        Variant::V4,
        Variant::V5,
        Variant::V6,
        Variant::V7,
    ];

    pub fn components(self) -> Components {
        let (grammar, strict, retrieval, feedback) = match self {
            Variant::V1 => (false, false, false, false),
            Variant::V2 => (true, false, false, false),
            Variant::V3 => (true, true, false, false),
            Variant::V4 => (true, true, true, false),
            Variant::V5 => (true, true, false, true),
            Variant::V6 => (false, true, true, true),
            Variant::V7 => (true, true, true, true),
        };
        Components {
            grammar,
            strict,
            retrieval,
            feedback,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
            Variant::V4 => "v4",
            Variant::V5 => "v5",
            Variant::V6 => "v6",
            Variant::V7 => "v7",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PipelineError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Option<Variant>,
    pub components: Components,
    pub k: usize,
    pub max_repairs: usize,
    pub consistency_rounds: usize,
    pub seed: u64,
    pub max_tokens: usize,
    pub temperature: f64,
    /// Send all requirements in one prompt instead of one prompt each.
    pub joint: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_variant(Variant::V7)
    }
}

impl PipelineConfig {
    pub fn for_variant(v: Variant) -> Self {
        PipelineConfig {
            variant: Some(v),
            components: v.components(),
            k: crate::rafsl::DEFAULT_K,
            max_repairs: 3,
            consistency_rounds: 2,
            seed: 0,
            max_tokens: 256,
            temperature: 0.0,
            joint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("unknown variant `{0}` (expected v1..v7)")]
    UnknownVariant(String),
    #[error("no requirements given")]
    NoRequirements,
    #[error("retrieval is enabled but no example index was supplied")]
    MissingIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate requirement id `{0}`")]
    DuplicateId(String),
    #[error("conflict feedback needs an unsatisfiable outcome")]
    NotUnsat,
    #[error("core member `{0}` has no formula")]
    UnknownCoreMember(String),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub text: String,
}

/// One requirement per line; `#` starts a comment line. A leading
/// `ID: ` names the requirement, otherwise ids run R1, R2, ...
pub fn parse_requirements(text: &str) -> Vec<Requirement> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let named = line.split_once(':').filter(|(id, rest)| {
            !id.is_empty()
                && !rest.trim().is_empty()
                && id.starts_with(|c: char| c.is_ascii_alphabetic())
                && id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        });
        let (id, text) = match named {
            Some((id, rest)) => (id.to_string(), rest.trim().to_string()),
            None => (format!("R{}", out.len() + 1), line.to_string()),
        };
        out.push(Requirement { id, text });
    }
    out
}

/// Source of few-shot examples for a query.
pub trait ExampleSource {
    fn examples(&self, query: &str, k: usize) -> Result<Vec<RetrievedExample>, RafslError>;
}

/// A [`RetrievalIndex`] searched with the embedder it was built with.
pub struct Retriever<'a> {
    pub index: &'a RetrievalIndex,
    pub embedder: &'a dyn Embedder,
}

impl ExampleSource for Retriever<'_> {
    fn examples(&self, query: &str, k: usize) -> Result<Vec<RetrievedExample>, RafslError> {
        Ok(self
            .index
            .search(self.embedder, query, k)?
            .into_iter()
            .map(|(index, score)| {
                let p = &self.index.pairs()[index];
                RetrievedExample {
                    index,
                    score,
                    nl: p.nl.clone(),
                    ltl: p.ltl.clone(),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub index: usize,
    pub score: f64,
    pub nl: String,
    pub ltl: String,
}

impl RetrievedExample {
    pub fn as_pair(&self) -> LiftedPair {
        LiftedPair {
            nl: self.nl.clone(),
            ltl: self.ltl.clone(),
            tags: vec![],
            source: String::new(),
            paraphrase_of: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Formula { ltl: String },
    NotLtl,
    SyntaxFailure { history: Vec<Attempt> },
    BackendFailure { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub id: String,
    pub requirement: String,
    pub outcome: Outcome,
    pub retrieved: Vec<RetrievedExample>,
    /// Constrained decoding produced the output.
    pub strict: bool,
    pub repair_rounds: usize,
    pub raw: Option<String>,
    /// Reserved; at most one formula is produced per requirement.
    pub alternatives: Vec<String>,
    pub backend_calls: usize,
}

impl TranslationResult {
    pub fn formula_text(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Formula { ltl } => Some(ltl),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetranslatedMember {
    pub id: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictRound {
    pub round: usize,
    pub core: Vec<String>,
    pub feedback: String,
    pub retranslated: Vec<RetranslatedMember>,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_after: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub ltl: Option<String>,
    /// `sat`, `unsat`, `empty` (nothing to check) or `error`.
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<LassoTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Ids left out of the conjunction because they did not translate.
    pub excluded: Vec<String>,
    pub rounds: Vec<ConflictRound>,
}

/// Deterministic work counters; `wall_ms` only when timing is requested.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub backend_calls: usize,
    pub step_queries: usize,
    pub retrievals: usize,
    pub checker_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetResult {
    pub version: String,
    pub config: PipelineConfig,
    pub results: Vec<TranslationResult>,
    pub joint: JointReport,
    pub timing: Timing,
}
