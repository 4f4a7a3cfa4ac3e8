//! Clause store: exact `(spec, clause, version)` lookup plus dense retrieval.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{read_chunks_jsonl, write_chunks_jsonl, ClauseChunk, ClauseId, SpecId, VersionNumber};
use crate::embedding::{vecfile, Embedder, ScoredHit, VectorIndex};
use crate::error::{Error, Result};

/// Which version of a clause a lookup or search should see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VersionPolicy {
    #[default]
    Latest,
    /// Newest version dated on or before the given day.
    AtOrBefore(NaiveDate),
    Exact(VersionNumber),
}

impl VersionPolicy {
    /// Picks from a version-sorted slice.
    fn select<'a>(&self, versions: impl DoubleEndedIterator<Item = &'a ClauseChunk>) -> Option<&'a ClauseChunk> {
        let mut versions = versions.rev();
        match self {
            VersionPolicy::Latest => versions.next(),
            VersionPolicy::AtOrBefore(date) => versions.find(|c| c.version.date <= *date),
            VersionPolicy::Exact(n) => versions.find(|c| c.version.number == *n),
        }
    }
}

impl fmt::Display for VersionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionPolicy::Latest => f.write_str("latest"),
            VersionPolicy::AtOrBefore(d) => write!(f, "at_or_before:{d}"),
            VersionPolicy::Exact(v) => write!(f, "exact:{v}"),
        }
    }
}

impl FromStr for VersionPolicy {
    type Err = Error;

    /// `latest`, `at_or_before:YYYY-MM-DD` or `exact:MAJ.MIN.PATCH`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "latest" {
            return Ok(VersionPolicy::Latest);
        }
        if let Some(d) = s.strip_prefix("at_or_before:") {
            let date = NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|e| Error::Parse(format!("bad date in version policy {s:?}: {e}")))?;
            return Ok(VersionPolicy::AtOrBefore(date));
        }
        if let Some(v) = s.strip_prefix("exact:") {
            return Ok(VersionPolicy::Exact(VersionNumber::parse(v)?));
        }
        Err(Error::Parse(format!("unknown version policy {s:?}")))
    }
}

impl Serialize for VersionPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VersionPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

#[derive(Debug, Clone)]
pub struct SpecDb {
    chunks: Vec<ClauseChunk>,
    by_uid: HashMap<String, usize>,
    by_clause: BTreeMap<(SpecId, ClauseId), Vec<usize>>,
    index: VectorIndex,
}

impl SpecDb {
    /// Embeds and indexes `chunks`. Chunks are stored sorted by spec, clause and version.
    pub fn build(mut chunks: Vec<ClauseChunk>, embedder: &dyn Embedder) -> Result<Self> {
        chunks.sort_by(|a, b| (&a.spec_id, &a.clause_id, a.version).cmp(&(&b.spec_id, &b.clause_id, b.version)));
        check_unique(&chunks)?;
        let texts: Vec<String> = chunks.iter().map(ClauseChunk::embedding_text).collect();
        let vectors = if texts.is_empty() { Vec::new() } else { embedder.embed(&texts)? };
        let dim = vectors.first().map_or(embedder.dim(), |v| v.dim());
        let mut index = VectorIndex::new(dim);
        for (chunk, v) in chunks.iter().zip(&vectors) {
            index.add(chunk.chunk_uid.clone(), v)?;
        }
        Self::assemble(chunks, index)
    }

    fn assemble(chunks: Vec<ClauseChunk>, index: VectorIndex) -> Result<Self> {
        let mut by_uid = HashMap::with_capacity(chunks.len());
        let mut by_clause: BTreeMap<(SpecId, ClauseId), Vec<usize>> = BTreeMap::new();
        for (i, c) in chunks.iter().enumerate() {
            if index.vector(&c.chunk_uid).is_none() {
                return Err(Error::InvalidInput(format!("no vector for {}", c.chunk_uid)));
            }
            by_uid.insert(c.chunk_uid.clone(), i);
            by_clause.entry(c.key()).or_default().push(i);
        }
        for rows in by_clause.values_mut() {
            rows.sort_by_key(|&i| chunks[i].version);
        }
        Ok(SpecDb { chunks, by_uid, by_clause, index })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[ClauseChunk] {
        &self.chunks
    }

    pub fn chunk(&self, uid: &str) -> Option<&ClauseChunk> {
        self.by_uid.get(uid).map(|&i| &self.chunks[i])
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    /// All stored versions of a clause, oldest first.
    pub fn versions(&self, spec_id: &SpecId, clause_id: &ClauseId) -> Vec<&ClauseChunk> {
        self.by_clause
            .get(&(spec_id.clone(), clause_id.clone()))
            .map(|rows| rows.iter().map(|&i| &self.chunks[i]).collect())
            .unwrap_or_default()
    }

    /// Distinct `(spec, clause)` keys in order.
    pub fn clause_keys(&self) -> impl Iterator<Item = &(SpecId, ClauseId)> {
        self.by_clause.keys()
    }

    pub fn lookup_clause(&self, spec_id: &SpecId, clause_id: &ClauseId, policy: VersionPolicy) -> Result<&ClauseChunk> {
        let not_found = || Error::NotFound { spec_id: spec_id.to_string(), clause_id: clause_id.to_string() };
        let rows = self.by_clause.get(&(spec_id.clone(), clause_id.clone())).ok_or_else(not_found)?;
        policy.select(rows.iter().map(|&i| &self.chunks[i])).ok_or_else(not_found)
    }

    /// One uid per clause: the version `policy` selects, if any.
    pub fn candidates(&self, policy: VersionPolicy) -> Vec<&str> {
        self.by_clause
            .values()
            .filter_map(|rows| policy.select(rows.iter().map(|&i| &self.chunks[i])))
            .map(|c| c.chunk_uid.as_str())
            .collect()
    }

    pub fn semantic_search(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        top_k: usize,
        policy: VersionPolicy,
    ) -> Result<Vec<ScoredHit>> {
        if self.is_empty() || top_k == 0 {
            return Ok(Vec::new());
        }
        let q = embedder.embed_one(query)?;
        self.search_vector(q.as_slice(), top_k, policy)
    }

    pub fn search_vector(&self, query: &[f32], top_k: usize, policy: VersionPolicy) -> Result<Vec<ScoredHit>> {
        self.index.search_among(query, self.candidates(policy), top_k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_chunks_jsonl(&dir.join(CHUNKS_FILE), &self.chunks)?;
        vecfile::write(&dir.join(VECTORS_FILE), self.index.dim(), self.index.data())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let chunks = read_chunks_jsonl(&dir.join(CHUNKS_FILE))?;
        let (dim, count, data) = vecfile::read(&dir.join(VECTORS_FILE))?;
        if count != chunks.len() {
            return Err(Error::Parse(format!("{}: {count} vectors for {} chunks", dir.display(), chunks.len())));
        }
        let uids = chunks.iter().map(|c| c.chunk_uid.clone()).collect();
        Self::assemble(chunks, VectorIndex::from_rows(dim, uids, data)?)
    }
}

fn check_unique(chunks: &[ClauseChunk]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    let mut dups: Vec<String> =
        chunks.iter().filter(|c| !seen.insert(&c.chunk_uid)).map(|c| c.chunk_uid.clone()).collect();
    dups.sort();
    dups.dedup();
    if dups.is_empty() {
        Ok(())
    } else {
        Err(Error::Duplicate(dups))
    }
}
