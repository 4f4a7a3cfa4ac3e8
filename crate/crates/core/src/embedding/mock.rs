use super::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::par;

/// Deterministic hashed bag-of-words embedder.
///
/// Tokens are lowercased runs of alphanumerics and inner dots (`38.214` is one
/// token). Each token adds 1 to bucket `fnv1a64(token) % dim`, and the counts are
/// L2-normalized.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("mock embedder needs dim > 0".into()));
        }
        Ok(MockEmbedder { dim })
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let mut buckets = vec![0.0f64; self.dim];
        let mut any = false;
        for token in mock_tokens(text) {
            buckets[(fnv1a64(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            return Err(Error::EmptyText);
        }
        EmbeddingVector::normalized(buckets)
    }
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        par::try_map(texts, |t| self.embed_text(t))
    }
}

pub fn mock_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '.'))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
