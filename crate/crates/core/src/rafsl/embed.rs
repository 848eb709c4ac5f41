use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::RafslError;
use crate::backend::{BackendError, HttpBackend};

pub const BUILTIN_DIMENSION: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub provider: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn dimension(&self) -> usize {
        self.vector.len()
    }

    /// Dot product; the cosine for unit vectors.
    pub fn dot(&self, other: &Embedding) -> f64 {
        dot(&self.vector, &other.vector)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    let na = dot(&a.vector, &a.vector).sqrt();
    let nb = dot(&b.vector, &b.vector).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0)
}

pub(crate) fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Result<Embedding, RafslError>;
}

/// Hashed word unigrams plus character trigrams, L2-normalized.
/// Placeholder words (`atom_3`) carry no signal and are skipped.
#[derive(Clone, Debug)]
pub struct BuiltinEmbedder {
    dimension: usize,
}

impl Default for BuiltinEmbedder {
    fn default() -> Self {
        BuiltinEmbedder {
            dimension: BUILTIN_DIMENSION,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn is_placeholder(word: &str) -> bool {
    word.strip_prefix("atom_")
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

impl BuiltinEmbedder {
    pub fn new(dimension: usize) -> Self {
        BuiltinEmbedder {
            dimension: dimension.max(1),
        }
    }

    fn add(&self, v: &mut [f64], feature: &[u8], weight: f64) {
        let h = fnv1a(feature);
        let slot = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[slot] += sign * weight;
    }
}

impl Embedder for BuiltinEmbedder {
    fn id(&self) -> String {
        format!("builtin-hash-{}", self.dimension)
    }

    fn embed(&self, text: &str) -> Result<Embedding, RafslError> {
        if text.trim().is_empty() {
            return Err(RafslError::EmptyText);
        }
        let lower = text.to_lowercase();
        let mut v = vec![0.0; self.dimension];
        let words = lower
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|w| !w.is_empty() && !is_placeholder(w));
        for w in words {
            let mut key = b"w:".to_vec();
            key.extend_from_slice(w.as_bytes());
            self.add(&mut v, &key, 1.0);
            let padded: Vec<u8> = format!("^{w}$").into_bytes();
            for tri in padded.windows(3) {
                let mut key = b"t:".to_vec();
                key.extend_from_slice(tri);
                self.add(&mut v, &key, 0.5);
            }
        }
        if v.iter().all(|x| *x == 0.0) {
            self.add(&mut v, b"empty", 1.0);
        }
        normalize(&mut v);
        Ok(Embedding {
            provider: self.id(),
            vector: v,
        })
    }
}

/// Calls `{endpoint}/embeddings` in the OpenAI request shape.
pub struct RemoteEmbedder {
    client: HttpBackend,
}

impl RemoteEmbedder {
    pub fn new(client: HttpBackend) -> Self {
        RemoteEmbedder { client }
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}@{}", self.client.model(), self.client.endpoint())
    }

    fn embed(&self, text: &str) -> Result<Embedding, RafslError> {
        if text.trim().is_empty() {
            return Err(RafslError::EmptyText);
        }
        let body = json!({"model": self.client.model(), "input": text});
        let raw = self.client.post("embeddings", &body)?;
        let parsed: Value =
            serde_json::from_str(&raw).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let vector: Vec<f64> = parsed
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Malformed("missing data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| BackendError::Malformed("non-numeric embedding entry".into()))?;
        if vector.is_empty() {
            return Err(BackendError::Malformed("empty embedding".into()).into());
        }
        Ok(Embedding {
            provider: self.id(),
            vector,
        })
    }
}
