use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Classification, GuardError, MaskStore, RecognizerState, SENTINEL};
use crate::backend::{Backend, GenParams, NextToken, Prompt};
use crate::ltl::parse;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generated {
    Formula(String),
    NotLtl,
}

/// How many recognizer states the forced-completion search may visit.
const COMPLETION_SEARCH: usize = 50_000;

/// Strict decoding: each step takes the best-scoring token the mask allows.
///
/// Before masking starts the backend may spell out [`SENTINEL`] unconstrained;
/// if it does, the result is [`Generated::NotLtl`].
pub fn constrained_generate<B: Backend + ?Sized>(
    backend: &B,
    prompt: &Prompt,
    store: &MaskStore,
    limits: &GenParams,
) -> Result<Generated, GuardError> {
    if prompt.system.trim().is_empty() && prompt.user.trim().is_empty() {
        return Err(GuardError::EmptyPrompt);
    }
    let cap = backend.capability();
    let vocab = cap
        .vocabulary
        .filter(|_| cap.step_wise)
        .ok_or(GuardError::Backend(
            crate::backend::BackendError::UnsupportedCapability,
        ))?;
    if vocab.hash() != store.vocabulary().hash() {
        return Err(GuardError::VocabularyMismatch);
    }

    if sentinel_run(backend, prompt, store, limits.max_tokens)? {
        return Ok(Generated::NotLtl);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
    let mut out: Vec<u8> = Vec::new();
    let mut state = RecognizerState::START;
    let mut finished = false;
    for _ in 0..limits.max_tokens {
        let dist = backend.next_token_distribution(prompt, &out)?;
        let mask = store.mask(state);
        let mut candidates: Vec<(NextToken, f64)> = dist
            .into_iter()
            .filter(|(t, s)| {
                s.is_finite()
                    && match t {
                        NextToken::End => true,
                        NextToken::Token(id) => mask.get(*id as usize).is_some_and(|b| *b),
                    }
            })
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
        let pick = if limits.temperature > 0.0 {
            sample(&candidates, limits.temperature, &mut rng)
        } else {
            candidates.first().map(|c| c.0)
        };
        match pick {
            Some(NextToken::Token(id)) => {
                let bytes = store.vocabulary().bytes(id);
                out.extend_from_slice(bytes);
                state = state.feed(bytes);
            }
            Some(NextToken::End) if state.classify() == Classification::Accepting => {
                finished = true;
                break;
            }
            // End at a non-accepting state, or nothing allowed: force a completion.
            Some(NextToken::End) | None => break,
        }
    }
    if !finished && state.classify() != Classification::Accepting {
        let path = store
            .shortest_completion(state, COMPLETION_SEARCH)
            .ok_or_else(|| GuardError::DeadEnd {
                prefix: String::from_utf8_lossy(&out).into_owned(),
            })?;
        for id in path {
            let bytes = store.vocabulary().bytes(id);
            out.extend_from_slice(bytes);
            state = state.feed(bytes);
        }
    }

    let text = String::from_utf8(out)
        .map_err(|_| GuardError::Internal("generated bytes are not UTF-8".into()))?;
    let text = text.trim().to_string();
    parse(&text).map_err(|d| {
        GuardError::Internal(format!("accepted output `{text}` fails to parse: {d}"))
    })?;
    Ok(Generated::Formula(text))
}

/// Greedy unconstrained decoding while the output stays a prefix of the
/// sentinel. True if the sentinel was produced in full.
fn sentinel_run<B: Backend + ?Sized>(
    backend: &B,
    prompt: &Prompt,
    store: &MaskStore,
    max_tokens: usize,
) -> Result<bool, GuardError> {
    let target = SENTINEL.as_bytes();
    let mut out: Vec<u8> = Vec::new();
    for _ in 0..max_tokens {
        let dist = backend.next_token_distribution(prompt, &out)?;
        let best = dist.iter().filter(|(_, s)| s.is_finite()).fold(
            None::<(NextToken, f64)>,
            |acc, &(t, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((t, s)),
            },
        );
        match best {
            Some((NextToken::Token(id), _)) => {
                out.extend_from_slice(store.vocabulary().bytes(id));
                let trimmed = trim_start(&out);
                if !target.starts_with(trimmed) && !trimmed.starts_with(target) {
                    return Ok(false);
                }
            }
            _ => break,
        }
    }
    let trimmed = trim_start(&out);
    let trimmed = trimmed.strip_suffix(b".").unwrap_or(trimmed);
    Ok(trimmed.trim_ascii_end() == target)
}

fn trim_start(b: &[u8]) -> &[u8] {
    b.trim_ascii_start()
}

fn sample(
    candidates: &[(NextToken, f64)],
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Option<NextToken> {
    let top = candidates.first()?.1;
    let weights: Vec<f64> = candidates
        .iter()
        .map(|(_, s)| ((s - top) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for ((t, _), w) in candidates.iter().zip(&weights) {
        if x < *w {
            return Some(*t);
        }
        x -= w;
    }
    candidates.last().map(|c| c.0)
}
