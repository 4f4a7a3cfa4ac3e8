//! Line-level change history of every clause.
//!
//! Versions of a clause are ordered by date. The first observed version yields
//! an `InitialAddition`, each later version with a non-empty diff yields a
//! `Modification`, and a clause missing from the spec's next version after its
//! last observation yields a `Removal`. Versions where the clause is missing
//! in between are skipped.

mod diff;

pub use diff::{apply_hunks, diff_lines, Hunk, LineDiff};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClauseChunk, ClauseId, SpecId, SpecVersion, VersionNumber};
use crate::embedding::{vecfile, Embedder, ScoredHit, VectorIndex};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    InitialAddition,
    Modification,
    Removal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEntry {
    pub entry_uid: String,
    pub spec_id: SpecId,
    pub clause_id: ClauseId,
    pub heading: String,
    pub kind: ChangeKind,
    pub from_version: Option<VersionNumber>,
    pub from_date: Option<NaiveDate>,
    pub to_version: VersionNumber,
    pub to_date: NaiveDate,
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<(String, String)>,
    pub hunks: Vec<Hunk>,
}

impl ChangeEntry {
    fn new(
        spec_id: &SpecId,
        clause_id: &ClauseId,
        heading: &str,
        kind: ChangeKind,
        from: Option<SpecVersion>,
        to: SpecVersion,
        diff: LineDiff,
    ) -> Self {
        let from_label = from.map_or_else(|| "new".to_string(), |v| v.number.to_string());
        ChangeEntry {
            entry_uid: format!("{spec_id}:{clause_id}@{from_label}..{}", to.number),
            spec_id: spec_id.clone(),
            clause_id: clause_id.clone(),
            heading: heading.to_string(),
            kind,
            from_version: from.map(|v| v.number),
            from_date: from.map(|v| v.date),
            to_version: to.number,
            to_date: to.date,
            added: diff.added,
            removed: diff.removed,
            modified: diff.modified,
            hunks: diff.hunks,
        }
    }

    pub fn to(&self) -> SpecVersion {
        SpecVersion::new(self.to_version, self.to_date)
    }

    pub fn from(&self) -> Option<SpecVersion> {
        Some(SpecVersion::new(self.from_version?, self.from_date?))
    }

    /// Embedding text: header line, then `+`, `-` and `~` lines, capped at `line_budget` lines.
    pub fn embedding_text(&self, line_budget: usize) -> String {
        let from = self.from_version.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut text = format!("{} {} {} change {from}→{}", self.spec_id, self.clause_id, self.heading, self.to_version);
        let lines = self
            .added
            .iter()
            .map(|l| format!("+ {l}"))
            .chain(self.removed.iter().map(|l| format!("- {l}")))
            .chain(self.modified.iter().map(|(o, n)| format!("~ {o} => {n}")));
        let mut total = 0;
        for (i, line) in lines.enumerate() {
            if i < line_budget {
                text.push('\n');
                text.push_str(&line);
            }
            total = i + 1;
        }
        if total > line_budget {
            let _ = write!(text, "\n… {} more lines", total - line_budget);
        }
        text
    }
}

pub const DEFAULT_LINE_BUDGET: usize = 200;
pub const ENTRIES_FILE: &str = "entries.jsonl";

#[derive(Debug, Clone)]
pub struct ChangeDb {
    entries: Vec<ChangeEntry>,
    by_uid: HashMap<String, usize>,
    by_clause: BTreeMap<(SpecId, ClauseId), Vec<usize>>,
    index: VectorIndex,
    line_budget: usize,
}

/// Change entries of one clause, given every observed version of its spec.
pub fn clause_history(versions: &[&ClauseChunk], spec_versions: &BTreeSet<SpecVersion>) -> Vec<ChangeEntry> {
    let mut sorted: Vec<&ClauseChunk> = versions.to_vec();
    sorted.sort_by_key(|c| c.version);
    let Some(first) = sorted.first() else { return Vec::new() };
    let (spec, clause) = (&first.spec_id, &first.clause_id);

    let mut out = vec![ChangeEntry::new(
        spec,
        clause,
        &first.heading,
        ChangeKind::InitialAddition,
        None,
        first.version,
        diff_lines(&[], &first.body),
    )];
    for pair in sorted.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let diff = diff_lines(&prev.body, &next.body);
        if !diff.is_empty() {
            out.push(ChangeEntry::new(
                spec,
                clause,
                &next.heading,
                ChangeKind::Modification,
                Some(prev.version),
                next.version,
                diff,
            ));
        }
    }
    let last = sorted[sorted.len() - 1];
    if let Some(&gone) = spec_versions.range(last.version..).find(|v| **v > last.version) {
        out.push(ChangeEntry::new(
            spec,
            clause,
            &last.heading,
            ChangeKind::Removal,
            Some(last.version),
            gone,
            diff_lines(&last.body, &[]),
        ));
    }
    out
}

impl ChangeDb {
    pub fn build(chunks: &[ClauseChunk], embedder: &dyn Embedder) -> Result<Self> {
        Self::build_with_budget(chunks, embedder, DEFAULT_LINE_BUDGET)
    }

    pub fn build_with_budget(chunks: &[ClauseChunk], embedder: &dyn Embedder, line_budget: usize) -> Result<Self> {
        let mut spec_versions: HashMap<&SpecId, BTreeSet<SpecVersion>> = HashMap::new();
        let mut groups: BTreeMap<(SpecId, ClauseId), Vec<&ClauseChunk>> = BTreeMap::new();
        for c in chunks {
            spec_versions.entry(&c.spec_id).or_default().insert(c.version);
            groups.entry(c.key()).or_default().push(c);
        }
        let groups: Vec<Vec<&ClauseChunk>> = groups.into_values().collect();
        let entries: Vec<ChangeEntry> =
            par::map(&groups, |g| clause_history(g, &spec_versions[&g[0].spec_id])).into_iter().flatten().collect();

        let texts: Vec<String> = entries.iter().map(|e| e.embedding_text(line_budget)).collect();
        let vectors = if texts.is_empty() { Vec::new() } else { embedder.embed(&texts)? };
        let dim = vectors.first().map_or(embedder.dim(), |v| v.dim());
        let mut index = VectorIndex::new(dim);
        for (e, v) in entries.iter().zip(&vectors) {
            index.add(e.entry_uid.clone(), v)?;
        }
        Self::assemble(entries, index, line_budget)
    }

    fn assemble(entries: Vec<ChangeEntry>, index: VectorIndex, line_budget: usize) -> Result<Self> {
        let mut by_uid = HashMap::with_capacity(entries.len());
        let mut by_clause: BTreeMap<(SpecId, ClauseId), Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if by_uid.insert(e.entry_uid.clone(), i).is_some() {
                return Err(Error::Duplicate(vec![e.entry_uid.clone()]));
            }
            by_clause.entry((e.spec_id.clone(), e.clause_id.clone())).or_default().push(i);
        }
        for rows in by_clause.values_mut() {
            rows.sort_by_key(|&i| entries[i].to());
        }
        Ok(ChangeDb { entries, by_uid, by_clause, index, line_budget })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ChangeEntry] {
        &self.entries
    }

    pub fn entry(&self, uid: &str) -> Option<&ChangeEntry> {
        self.by_uid.get(uid).map(|&i| &self.entries[i])
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn line_budget(&self) -> usize {
        self.line_budget
    }

    /// Entries of one clause ordered by target version.
    pub fn chain(&self, spec_id: &SpecId, clause_id: &ClauseId) -> Vec<&ChangeEntry> {
        self.by_clause
            .get(&(spec_id.clone(), clause_id.clone()))
            .map(|rows| rows.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// Replays a clause's chain; each step gives the body after that entry, `None` once removed.
    pub fn replay(&self, spec_id: &SpecId, clause_id: &ClauseId) -> Vec<(SpecVersion, Option<Vec<String>>)> {
        let mut state: Option<Vec<String>> = None;
        let mut out = Vec::new();
        for e in self.chain(spec_id, clause_id) {
            state = match e.kind {
                ChangeKind::InitialAddition => Some(apply_hunks(&e.hunks, &[])),
                ChangeKind::Modification => Some(apply_hunks(&e.hunks, state.as_deref().unwrap_or_default())),
                ChangeKind::Removal => None,
            };
            out.push((e.to(), state.clone()));
        }
        out
    }

    /// Clause body in force at `version`, from the last replay step at or before it.
    pub fn body_at(&self, spec_id: &SpecId, clause_id: &ClauseId, version: SpecVersion) -> Option<Vec<String>> {
        self.replay(spec_id, clause_id).into_iter().take_while(|(v, _)| *v <= version).last().and_then(|(_, b)| b)
    }

    pub fn search_changes(&self, embedder: &dyn Embedder, query: &str, top_k: usize) -> Result<Vec<ScoredHit>> {
        if self.is_empty() || top_k == 0 {
            return Ok(Vec::new());
        }
        let q = embedder.embed_one(query)?;
        self.index.search(q.as_slice(), top_k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::corpus::write_jsonl_file(&dir.join(ENTRIES_FILE), &self.entries)?;
        vecfile::write(&dir.join(crate::spec_db::VECTORS_FILE), self.index.dim(), self.index.data())
    }

    pub fn load(dir: &Path, line_budget: usize) -> Result<Self> {
        let entries: Vec<ChangeEntry> = crate::corpus::read_jsonl_file(&dir.join(ENTRIES_FILE))?;
        let (dim, count, data) = vecfile::read(&dir.join(crate::spec_db::VECTORS_FILE))?;
        if count != entries.len() {
            return Err(Error::Parse(format!("{}: {count} vectors for {} entries", dir.display(), entries.len())));
        }
        let uids = entries.iter().map(|e| e.entry_uid.clone()).collect();
        Self::assemble(entries, VectorIndex::from_rows(dim, uids, data)?, line_budget)
    }
}
