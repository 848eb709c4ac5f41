//! Deterministic scripted backends for tests and offline runs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, Capability, GenParams, NextToken, Prompt};
use crate::guard::Vocabulary;

/// ~50 tokens: LTL lexemes, spaced fragments, atoms split across lexeme
/// boundaries, and a few bytes that never extend a valid prefix.
const DEFAULT_TOKENS: &[&str] = &[
    "G",
    "F",
    "X",
    "U",
    "!",
    "&",
    "|",
    "->",
    "<->",
    "(",
    ")",
    " ",
    "true",
    "false",
    " -> ",
    " & ",
    " | ",
    " U ",
    "G(",
    "F(",
    "X(",
    "!(",
    "GF",
    "G F ",
    "p",
    "q",
    "r",
    "s",
    "p)",
    "q)",
    "request",
    "granted",
    "grant",
    "safe",
    "message",
    "delivered",
    "req",
    "uest",
    "gran",
    "ted",
    "ted)",
    "atom_",
    "1",
    "2",
    "-",
    ">",
    "<",
    "_",
    "P",
    "))",
];

pub fn default_vocabulary() -> Vocabulary {
    Vocabulary::from_strs(DEFAULT_TOKENS).expect("default vocabulary is well-formed")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Any,
    /// One of the prompt's requirement texts equals this string.
    Requirement(String),
    /// The user message contains this string.
    Contains(String),
    PromptHash(String),
}

impl Matcher {
    fn matches(&self, prompt: &Prompt, hash: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Requirement(r) => prompt.requirements.iter().any(|x| x.trim() == r.trim()),
            Matcher::Contains(s) => prompt.user.contains(s.as_str()),
            Matcher::PromptHash(h) => h == hash,
        }
    }
}

/// Replies handed out in order to prompts matching `when`. Once exhausted
/// the rule is skipped, unless `cycle` restarts it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub when: Matcher,
    pub replies: Vec<String>,
    #[serde(default)]
    pub cycle: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPolicy {
    /// `favorite` always scores highest; the rest get seeded scores.
    Adversarial { favorite: String },
    /// End-of-output always scores highest.
    EndFirst,
    /// Spells out `text` token by token.
    Scripted { text: String },
    /// Spells out the reply the rules assign to the prompt.
    FollowRules,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepScript {
    /// Token strings; the shipped test vocabulary when absent.
    #[serde(default)]
    pub vocabulary: Option<Vec<String>>,
    pub policy: StepPolicy,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub step: Option<StepScript>,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text).map_err(|e| BackendError::Config(format!("mock script: {e}")))
    }

    /// One rule per `(requirement, reply)`.
    pub fn by_requirement<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        MockScript {
            rules: pairs
                .into_iter()
                .map(|(req, reply)| MockRule {
                    when: Matcher::Requirement(req.to_string()),
                    replies: vec![reply.to_string()],
                    cycle: true,
                })
                .collect(),
            step: None,
        }
    }
}

#[derive(Default)]
struct MockState {
    cursor: Vec<usize>,
    replies: HashMap<String, String>,
}

/// Scripted backend. Replies are fixed per distinct prompt: the first time a
/// prompt is seen, the first matching rule hands out its next reply.
pub struct MockBackend {
    script: MockScript,
    vocabulary: Option<Arc<Vocabulary>>,
    state: Mutex<MockState>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, BackendError> {
        let vocabulary = match &script.step {
            None => None,
            Some(StepScript {
                vocabulary: Some(tokens),
                ..
            }) => Some(Arc::new(
                Vocabulary::from_strs(tokens).map_err(|e| BackendError::Config(e.to_string()))?,
            )),
            Some(_) => Some(Arc::new(default_vocabulary())),
        };
        if let (
            Some(StepScript {
                policy: StepPolicy::Adversarial { favorite },
                ..
            }),
            Some(v),
        ) = (&script.step, &vocabulary)
        {
            if v.find(favorite.as_bytes()).is_none() {
                return Err(BackendError::Config(format!(
                    "favorite token `{favorite}` is not in the vocabulary"
                )));
            }
        }
        let state = MockState {
            cursor: vec![0; script.rules.len()],
            replies: HashMap::new(),
        };
        Ok(MockBackend {
            script,
            vocabulary,
            state: Mutex::new(state),
        })
    }

    /// The reply bound to `prompt`, consuming a rule reply on first sight.
    fn reply_for(&self, prompt: &Prompt) -> Option<String> {
        let hash = prompt.hash();
        let mut st = self.state.lock().expect("mock state poisoned");
        if let Some(r) = st.replies.get(&hash) {
            return Some(r.clone());
        }
        for (i, rule) in self.script.rules.iter().enumerate() {
            if !rule.when.matches(prompt, &hash) || rule.replies.is_empty() {
                continue;
            }
            let mut at = st.cursor[i];
            if at >= rule.replies.len() {
                if !rule.cycle {
                    continue;
                }
                at = 0;
            }
            st.cursor[i] = at + 1;
            let reply = rule.replies[at].clone();
            st.replies.insert(hash, reply.clone());
            return Some(reply);
        }
        None
    }

    fn step(&self) -> Result<(&StepScript, &Vocabulary), BackendError> {
        match (&self.script.step, &self.vocabulary) {
            (Some(s), Some(v)) => Ok((s, v)),
            _ => Err(BackendError::UnsupportedCapability),
        }
    }

    /// Next token spelling `target` after `generated`: longest vocabulary
    /// token that is a prefix of the remaining text.
    fn follow(vocab: &Vocabulary, target: &str, generated: &[u8]) -> Vec<(super::NextToken, f64)> {
        let target = target.trim().as_bytes();
        let pick = if generated.len() <= target.len() && target.starts_with(generated) {
            let rest = &target[generated.len()..];
            if rest.is_empty() {
                Some(NextToken::End)
            } else {
                vocab
                    .iter()
                    .filter(|(_, bytes)| rest.starts_with(bytes))
                    .max_by_key(|(id, bytes)| (bytes.len(), std::cmp::Reverse(*id)))
                    .map(|(id, _)| NextToken::Token(id))
            }
        } else {
            None
        };
        let pick = pick.unwrap_or(NextToken::End);
        let mut out = vec![(pick, 1.0)];
        out.extend(
            vocab
                .iter()
                .map(|(id, _)| NextToken::Token(id))
                .chain(std::iter::once(NextToken::End))
                .filter(|t| *t != pick)
                .map(|t| (t, 0.0)),
        );
        out
    }

    fn seeded_rng(seed: u64, prompt: &Prompt, generated: &[u8]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(prompt.hash().as_bytes());
        h.update(generated);
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }

    /// Greedy decoding of the mock's own step-wise scores.
    fn greedy(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        let (_, vocab) = self.step()?;
        let mut out: Vec<u8> = Vec::new();
        for _ in 0..params.max_tokens {
            let dist = self.next_token_distribution(prompt, &out)?;
            match dist.first() {
                Some((NextToken::Token(id), _)) => out.extend_from_slice(vocab.bytes(*id)),
                _ => break,
            }
        }
        Ok(String::from_utf8_lossy(&out).trim().to_string())
    }
}

impl Backend for MockBackend {
    fn capability(&self) -> Capability {
        Capability {
            full_text: true,
            step_wise: self.vocabulary.is_some(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        if let Some(reply) = self.reply_for(prompt) {
            return Ok(reply.trim().to_string());
        }
        match self.script.step.as_ref().map(|s| &s.policy) {
            Some(StepPolicy::FollowRules) | None => Err(BackendError::ScriptExhausted),
            Some(_) => self.greedy(prompt, params),
        }
    }

    fn next_token_distribution(
        &self,
        prompt: &Prompt,
        generated: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        let (step, vocab) = self.step()?;
        match &step.policy {
            StepPolicy::Scripted { text } => Ok(Self::follow(vocab, text, generated)),
            StepPolicy::FollowRules => {
                let target = self
                    .reply_for(prompt)
                    .ok_or(BackendError::ScriptExhausted)?;
                Ok(Self::follow(vocab, &target, generated))
            }
            StepPolicy::EndFirst => {
                let n = vocab.len() as f64;
                let mut out = vec![(NextToken::End, 1.0)];
                out.extend(
                    vocab
                        .iter()
                        .map(|(id, _)| (NextToken::Token(id), 0.5 * (1.0 - id as f64 / n))),
                );
                Ok(out)
            }
            StepPolicy::Adversarial { favorite } => {
                let fav = vocab
                    .find(favorite.as_bytes())
                    .expect("checked at construction");
                let mut rng = Self::seeded_rng(step.seed, prompt, generated);
                let mut out: Vec<(NextToken, f64)> = vocab
                    .iter()
                    .map(|(id, _)| NextToken::Token(id))
                    .chain(std::iter::once(NextToken::End))
                    .map(|t| {
                        let score = if t == NextToken::Token(fav) {
                            1.0
                        } else {
                            rng.gen_range(0.0..0.9)
                        };
                        (t, score)
                    })
                    .collect();
                out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                Ok(out)
            }
        }
    }
}
