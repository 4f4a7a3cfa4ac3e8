use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EmbeddingVector;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub item_uid: String,
    pub score: f64,
}

/// Descending score, ties by ascending uid.
pub fn sort_hits(hits: &mut [ScoredHit]) {
    hits.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.item_uid.cmp(&b.item_uid))
    });
}

/// Cosine similarity accumulated in f64, clamped to [-1, 1]; 0 when either side is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Exact cosine index. Rows live in one flat row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    uids: Vec<String>,
    data: Vec<f32>,
    rows: HashMap<String, usize>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        VectorIndex { dim, uids: Vec::new(), data: Vec::new(), rows: HashMap::new() }
    }

    /// Rebuilds an index from persisted rows.
    pub fn from_rows(dim: usize, uids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if data.len() != dim * uids.len() {
            return Err(Error::InvalidInput(format!(
                "{} floats cannot hold {} rows of dim {dim}",
                data.len(),
                uids.len()
            )));
        }
        let rows: HashMap<String, usize> = uids.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        if rows.len() != uids.len() {
            return Err(Error::Duplicate(vec!["vector index uids".into()]));
        }
        Ok(VectorIndex { dim, uids, data, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.uids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uids.is_empty()
    }

    pub fn uids(&self) -> &[String] {
        &self.uids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Adds or replaces a row; replacing logs a warning.
    pub fn add(&mut self, item_uid: impl Into<String>, vector: &EmbeddingVector) -> Result<()> {
        let values = vector.as_slice();
        if values.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, actual: values.len() });
        }
        let item_uid = item_uid.into();
        match self.rows.get(&item_uid) {
            Some(&row) => {
                log::warn!("vector index: replacing {item_uid}");
                self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(values);
            }
            None => {
                self.rows.insert(item_uid.clone(), self.uids.len());
                self.uids.push(item_uid);
                self.data.extend_from_slice(values);
            }
        }
        Ok(())
    }

    pub fn vector(&self, item_uid: &str) -> Option<&[f32]> {
        self.rows.get(item_uid).map(|&r| self.row(r))
    }

    fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// Top `top_k` rows by exact cosine similarity.
    pub fn search(&self, query: &[f32], top_k: usize) -> Result<Vec<ScoredHit>> {
        let rows: Vec<usize> = (0..self.len()).collect();
        self.rank_rows(query, &rows, top_k)
    }

    /// Like [`search`](Self::search) but only over `candidates`; unknown uids are ignored.
    pub fn search_among<'a>(
        &self,
        query: &[f32],
        candidates: impl IntoIterator<Item = &'a str>,
        top_k: usize,
    ) -> Result<Vec<ScoredHit>> {
        let mut rows: Vec<usize> = candidates.into_iter().filter_map(|u| self.rows.get(u).copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        self.rank_rows(query, &rows, top_k)
    }

    fn rank_rows(&self, query: &[f32], rows: &[usize], top_k: usize) -> Result<Vec<ScoredHit>> {
        if query.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, actual: query.len() });
        }
        if top_k == 0 || rows.is_empty() {
            return Ok(Vec::new());
        }
        let mut hits = par::map(rows, |&r| ScoredHit { item_uid: self.uids[r].clone(), score: cosine(query, self.row(r)) });
        sort_hits(&mut hits);
        hits.truncate(top_k);
        Ok(hits)
    }
}
