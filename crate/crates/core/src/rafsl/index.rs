use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::embed::{dot, normalize};
use super::{Embedder, Embedding, LiftedPair, RafslError};

/// Flat exact-scan index over unit-normalized embeddings.
#[derive(Clone, Debug)]
pub struct RetrievalIndex {
    pairs: Vec<LiftedPair>,
    vectors: Vec<Vec<f64>>,
    provider: String,
    dimension: usize,
    /// Seconds since the Unix epoch; not part of equality.
    pub built_at: u64,
}

impl PartialEq for RetrievalIndex {
    fn eq(&self, other: &Self) -> bool {
        self.pairs == other.pairs
            && self.vectors == other.vectors
            && self.provider == other.provider
            && self.dimension == other.dimension
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn check_pairs(pairs: &[LiftedPair]) -> Result<(), RafslError> {
    if pairs.is_empty() {
        return Err(RafslError::EmptyCorpus);
    }
    let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
    for (index, p) in pairs.iter().enumerate() {
        p.validate()
            .map_err(|reason| RafslError::InvalidPair { index, reason })?;
        if let Some(&first) = seen.get(&(p.nl.as_str(), p.ltl.as_str())) {
            return Err(RafslError::Duplicate { index, first });
        }
        seen.insert((p.nl.as_str(), p.ltl.as_str()), index);
    }
    Ok(())
}

fn unit(mut e: Embedding, dimension: Option<usize>) -> Result<Vec<f64>, RafslError> {
    if let Some(d) = dimension {
        if e.vector.len() != d {
            return Err(RafslError::Dimension {
                expected: d,
                got: e.vector.len(),
            });
        }
    }
    normalize(&mut e.vector);
    Ok(e.vector)
}

pub fn build_index<E: Embedder + ?Sized>(
    pairs: Vec<LiftedPair>,
    embedder: &E,
) -> Result<RetrievalIndex, RafslError> {
    check_pairs(&pairs)?;
    let mut vectors = Vec::with_capacity(pairs.len());
    let mut dimension = None;
    for p in &pairs {
        let v = unit(embedder.embed(&p.nl)?, dimension)?;
        dimension = Some(v.len());
        vectors.push(v);
    }
    Ok(RetrievalIndex {
        pairs,
        vectors,
        provider: embedder.id(),
        dimension: dimension.unwrap_or(0),
        built_at: now(),
    })
}

/// SHA-256 over the canonical JSON of each pair.
pub fn corpus_hash(pairs: &[LiftedPair]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in pairs {
        h.update(serde_json::to_string(p).expect("pair serializes"));
        h.update(b"\n");
    }
    h.finalize().into()
}

const CACHE_MAGIC: &[u8; 8] = b"RQLTIDX\0";
const CACHE_VERSION: u32 = 1;

impl RetrievalIndex {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[LiftedPair] {
        &self.pairs
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Top `k` pairs by cosine with `query`, best first; equal scores keep
    /// corpus order.
    pub fn retrieve<E: Embedder + ?Sized>(
        &self,
        embedder: &E,
        query: &str,
        k: usize,
    ) -> Result<Vec<(&LiftedPair, f64)>, RafslError> {
        Ok(self
            .search(embedder, query, k)?
            .into_iter()
            .map(|(i, s)| (&self.pairs[i], s))
            .collect())
    }

    /// Like [`retrieve`](Self::retrieve) but yields corpus positions.
    pub fn search<E: Embedder + ?Sized>(
        &self,
        embedder: &E,
        query: &str,
        k: usize,
    ) -> Result<Vec<(usize, f64)>, RafslError> {
        if embedder.id() != self.provider {
            return Err(RafslError::ProviderMismatch {
                expected: self.provider.clone(),
                got: embedder.id(),
            });
        }
        let q = unit(embedder.embed(query)?, Some(self.dimension))?;
        Ok(self.search_vector(&q, k))
    }

    pub fn search_vector(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .map(|v| dot(v, query).clamp(-1.0, 1.0))
            .enumerate()
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored.truncate(k.max(1));
        scored
    }

    /// Writes the embeddings, keyed by corpus hash and provider id.
    pub fn save(&self, path: &Path) -> Result<(), RafslError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&corpus_hash(&self.pairs));
        buf.extend_from_slice(&(self.provider.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.provider.as_bytes());
        buf.extend_from_slice(&self.built_at.to_le_bytes());
        buf.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        buf.extend_from_slice(&(self.vectors.len() as u32).to_le_bytes());
        for v in &self.vectors {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| RafslError::Io(format!("{}: {e}", path.display())))
    }

    /// Loads a cache written for exactly `pairs` by `provider`.
    pub fn load(path: &Path, pairs: Vec<LiftedPair>, provider: &str) -> Result<Self, RafslError> {
        let data =
            std::fs::read(path).map_err(|e| RafslError::Io(format!("{}: {e}", path.display())))?;
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8], RafslError> {
            let s = data
                .get(pos..pos + n)
                .ok_or_else(|| RafslError::Cache("truncated cache file".into()))?;
            pos += n;
            Ok(s)
        };
        let u32_of = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
        if take(8)? != CACHE_MAGIC {
            return Err(RafslError::Cache("not an index cache".into()));
        }
        let version = u32_of(take(4)?);
        if version != CACHE_VERSION as usize {
            return Err(RafslError::Cache(format!(
                "unsupported cache version {version}"
            )));
        }
        if take(32)? != corpus_hash(&pairs) {
            return Err(RafslError::Cache("corpus hash mismatch".into()));
        }
        let plen = u32_of(take(4)?);
        let cached_provider = String::from_utf8_lossy(take(plen)?).into_owned();
        if cached_provider != provider {
            return Err(RafslError::ProviderMismatch {
                expected: provider.to_string(),
                got: cached_provider,
            });
        }
        let mut ts = [0u8; 8];
        ts.copy_from_slice(take(8)?);
        let dimension = u32_of(take(4)?);
        let n = u32_of(take(4)?);
        if n != pairs.len() {
            return Err(RafslError::Cache("entry count mismatch".into()));
        }
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = take(dimension * 8)?;
            vectors.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            );
        }
        check_pairs(&pairs)?;
        Ok(RetrievalIndex {
            pairs,
            vectors,
            provider: cached_provider,
            dimension,
            built_at: u64::from_le_bytes(ts),
        })
    }
}
