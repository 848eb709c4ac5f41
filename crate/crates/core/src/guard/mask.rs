use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use bitvec::vec::BitVec;
use sha2::{Digest, Sha256};

use super::recognizer::{Classification, Lexeme, RecognizerState};
use super::GuardError;
use crate::ltl::GRAMMAR_TEXT;

pub type TokenId = u32;

/// Token id → bytes, as exposed by a step-wise backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<Vec<u8>>) -> Result<Self, GuardError> {
        if tokens.is_empty() {
            return Err(GuardError::EmptyVocabulary);
        }
        if let Some(id) = tokens.iter().position(Vec::is_empty) {
            return Err(GuardError::EmptyToken(id as TokenId));
        }
        Ok(Vocabulary { tokens })
    }

    pub fn from_strs<S: AsRef<str>>(tokens: &[S]) -> Result<Self, GuardError> {
        Self::new(
            tokens
                .iter()
                .map(|t| t.as_ref().as_bytes().to_vec())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bytes(&self, id: TokenId) -> &[u8] {
        &self.tokens[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &[u8])> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (i as TokenId, t.as_slice()))
    }

    pub fn find(&self, bytes: &[u8]) -> Option<TokenId> {
        self.tokens
            .iter()
            .position(|t| t == bytes)
            .map(|i| i as TokenId)
    }

    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t);
        }
        h.finalize().into()
    }
}

/// Identifies the grammar and recognizer a cached mask store was built for.
pub fn grammar_hash() -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"ltl-recognizer-v1\0");
    h.update(GRAMMAR_TEXT.as_bytes());
    h.finalize().into()
}

/// Lookup from recognizer state to the tokens that keep the output a viable
/// prefix. Masks beyond the pre-computed set are filled in on first use.
#[derive(Debug)]
pub struct MaskStore {
    vocab: Arc<Vocabulary>,
    masks: RwLock<HashMap<RecognizerState, Arc<BitVec>>>,
}

fn compute_mask(vocab: &Vocabulary, state: RecognizerState) -> BitVec {
    vocab
        .iter()
        .map(|(_, bytes)| !state.feed(bytes).is_invalid())
        .collect()
}

/// Pre-computes masks for up to `state_budget` states reachable from the
/// start state by whole tokens, breadth first.
pub fn build_mask_store(vocab: Arc<Vocabulary>, state_budget: usize) -> MaskStore {
    let mut masks = HashMap::new();
    let mut queue = VecDeque::from([RecognizerState::START]);
    let mut seen = HashSet::from([RecognizerState::START]);
    while let Some(state) = queue.pop_front() {
        if masks.len() >= state_budget {
            break;
        }
        let mask = compute_mask(&vocab, state);
        for (id, bytes) in vocab.iter() {
            if mask[id as usize] {
                let next = state.feed(bytes);
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        masks.insert(state, Arc::new(mask));
    }
    MaskStore {
        vocab,
        masks: RwLock::new(masks),
    }
}

const CACHE_MAGIC: &[u8; 8] = b"RQLTMASK";
const CACHE_VERSION: u32 = 1;

impl MaskStore {
    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    /// Number of memoized states.
    pub fn len(&self) -> usize {
        self.masks.read().expect("mask lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self, state: RecognizerState) -> Arc<BitVec> {
        if let Some(m) = self.masks.read().expect("mask lock").get(&state) {
            return m.clone();
        }
        let m = Arc::new(compute_mask(&self.vocab, state));
        self.masks
            .write()
            .expect("mask lock")
            .entry(state)
            .or_insert(m)
            .clone()
    }

    pub fn allowed(&self, state: RecognizerState, token: TokenId) -> bool {
        self.mask(state)[token as usize]
    }

    /// Fewest whole tokens taking `state` to an accepting state, searching at
    /// most `max_states` states.
    pub fn shortest_completion(
        &self,
        state: RecognizerState,
        max_states: usize,
    ) -> Option<Vec<TokenId>> {
        if state.classify() == Classification::Accepting {
            return Some(vec![]);
        }
        let mut parent: HashMap<RecognizerState, (RecognizerState, TokenId)> = HashMap::new();
        let mut queue = VecDeque::from([state]);
        let mut seen = HashSet::from([state]);
        while let Some(s) = queue.pop_front() {
            let mask = self.mask(s);
            for (id, bytes) in self.vocab.iter() {
                if !mask[id as usize] {
                    continue;
                }
                let next = s.feed(bytes);
                if !seen.insert(next) {
                    continue;
                }
                parent.insert(next, (s, id));
                if next.classify() == Classification::Accepting {
                    let mut path = vec![];
                    let mut cur = next;
                    while cur != state {
                        let (prev, id) = parent[&cur];
                        path.push(id);
                        cur = prev;
                    }
                    path.reverse();
                    return Some(path);
                }
                if seen.len() >= max_states {
                    return None;
                }
                queue.push_back(next);
            }
        }
        None
    }

    /// Writes the memoized masks, keyed by grammar and vocabulary hashes.
    pub fn save(&self, path: &Path) -> Result<(), GuardError> {
        let io = |e: std::io::Error| GuardError::Cache(e.to_string());
        let masks = self.masks.read().expect("mask lock");
        let mut entries: Vec<_> = masks.iter().collect();
        entries.sort_by_key(|(s, _)| **s);

        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&grammar_hash());
        buf.extend_from_slice(&self.vocab.hash());
        buf.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (state, mask) in entries {
            buf.push(lexeme_code(state.lexeme));
            buf.extend_from_slice(&state.depth.to_le_bytes());
            buf.push(state.expect_operand as u8);
            let mut packed = vec![0u8; mask.len().div_ceil(8)];
            for i in mask.iter_ones() {
                packed[i / 8] |= 1 << (i % 8);
            }
            buf.extend_from_slice(&packed);
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(io)
    }

    /// Loads a cache written by [`save`](Self::save) for the same vocabulary.
    pub fn load(path: &Path, vocab: Arc<Vocabulary>) -> Result<MaskStore, GuardError> {
        let mut data = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut data))
            .map_err(|e| GuardError::Cache(e.to_string()))?;
        let mut r = Reader {
            data: &data,
            pos: 0,
        };
        if r.take(8)? != CACHE_MAGIC {
            return Err(GuardError::Cache("not a mask-store cache".into()));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(GuardError::Cache(format!(
                "unsupported cache version {version}"
            )));
        }
        if r.take(32)? != grammar_hash() {
            return Err(GuardError::Cache("grammar hash mismatch".into()));
        }
        if r.take(32)? != vocab.hash() {
            return Err(GuardError::Cache("vocabulary hash mismatch".into()));
        }
        let n_tokens = r.u32()? as usize;
        if n_tokens != vocab.len() {
            return Err(GuardError::Cache("vocabulary size mismatch".into()));
        }
        let n = r.u32()? as usize;
        let mut masks = HashMap::with_capacity(n);
        for _ in 0..n {
            let lexeme = lexeme_from_code(r.take(1)?[0])?;
            let depth = r.u32()?;
            let expect_operand = r.take(1)?[0] != 0;
            let packed = r.take(n_tokens.div_ceil(8))?;
            let mask: BitVec = (0..n_tokens)
                .map(|i| packed[i / 8] >> (i % 8) & 1 == 1)
                .collect();
            masks.insert(
                RecognizerState {
                    lexeme,
                    depth,
                    expect_operand,
                },
                Arc::new(mask),
            );
        }
        Ok(MaskStore {
            vocab,
            masks: RwLock::new(masks),
        })
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GuardError> {
        let end = self.pos + n;
        let slice = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| GuardError::Cache("truncated cache file".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, GuardError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn lexeme_code(l: Lexeme) -> u8 {
    match l {
        Lexeme::Idle => 0,
        Lexeme::Word => 1,
        Lexeme::Operator => 2,
        Lexeme::Dash => 3,
        Lexeme::Less => 4,
        Lexeme::LessDash => 5,
        Lexeme::Dead => 6,
    }
}

fn lexeme_from_code(c: u8) -> Result<Lexeme, GuardError> {
    Ok(match c {
        0 => Lexeme::Idle,
        1 => Lexeme::Word,
        2 => Lexeme::Operator,
        3 => Lexeme::Dash,
        4 => Lexeme::Less,
        5 => Lexeme::LessDash,
        6 => Lexeme::Dead,
        _ => return Err(GuardError::Cache(format!("bad lexeme code {c}"))),
    })
}
