//! Change Request store: one chunk per summarized change, carrying the CR's reason and consequence.
//!
//! Input is a normalized cover-sheet dump with labeled sections:
//!
//! ```text
//! TDoc: R1-2301234
//! Spec: TS 38.213
//! CR: 0421
//! Meeting: RAN1#112
//! Date: 2023-02-27
//! Summary of change:
//! - Clarify PUCCH repetition for Msg4 HARQ-ACK
//! - Align the slot counting with clause 9.2.6
//! Reason for change:
//! The repetition rule was ambiguous ...
//! Consequences if not approved:
//! Misaligned UE and gNB behaviour.
//! Clauses affected: 9.2.6, 9.2.3
//! ```
//!
//! Labels match case-insensitively at line start. A value may follow the colon
//! or continue on later lines. `TDoc:` is optional when the tdoc id is the file stem.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClauseId, SpecId};
use crate::embedding::{vecfile, Embedder, ScoredHit, VectorIndex};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrDocument {
    pub tdoc_id: String,
    pub spec_id: SpecId,
    pub cr_number: String,
    pub title: String,
    pub meeting: String,
    pub date: Option<NaiveDate>,
    pub summary_items: Vec<String>,
    pub reason: String,
    pub consequence: String,
    pub clauses_affected: Vec<ClauseId>,
    pub status: String,
}

/// Words below which a CR field counts as brief.
pub const TRIVIAL_WORDS: usize = 200;

impl CrDocument {
    /// True when summary, reason and consequence are all brief, typical of editorial CRs.
    pub fn is_trivial(&self, min_words: usize) -> bool {
        let words = |s: &str| s.split_whitespace().count();
        words(&self.summary_items.join(" ")) < min_words
            && words(&self.reason) < min_words
            && words(&self.consequence) < min_words
    }
}

#[derive(Debug, Clone)]
pub struct ParsedCr {
    pub document: CrDocument,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Label {
    TDoc,
    Spec,
    Cr,
    Title,
    Meeting,
    Date,
    Status,
    Summary,
    Reason,
    Consequence,
    Clauses,
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(tdoc|spec|cr|title|meeting|date|status|summary of change|reason for change|consequences if not approved|clauses affected)\s*:\s*(.*)$",
        )
        .unwrap()
    })
}

fn item_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*]|\d+\))\s*(.*)$").unwrap())
}

fn label_of(raw: &str) -> Label {
    match raw.to_ascii_lowercase().as_str() {
        "tdoc" => Label::TDoc,
        "spec" => Label::Spec,
        "cr" => Label::Cr,
        "title" => Label::Title,
        "meeting" => Label::Meeting,
        "date" => Label::Date,
        "status" => Label::Status,
        "summary of change" => Label::Summary,
        "reason for change" => Label::Reason,
        "consequences if not approved" => Label::Consequence,
        _ => Label::Clauses,
    }
}

/// Parses one normalized CR. `source` names the input in errors; its file stem
/// is the tdoc id when there is no `TDoc:` line.
pub fn parse_cr(text: &str, source: &str) -> Result<ParsedCr> {
    let fail = |message: String| Error::ParseFile { path: source.into(), message };
    let mut warnings = Vec::new();
    let mut sections: HashMap<Label, Vec<String>> = HashMap::new();
    let mut current: Option<Label> = None;

    for (lineno, line) in text.lines().enumerate() {
        if let Some(caps) = label_re().captures(line) {
            let label = label_of(&caps[1]);
            let lines = sections.entry(label).or_default();
            if !lines.is_empty() {
                warnings.push(format!("{source}:{}: repeated section {:?}, appending", lineno + 1, &caps[1]));
            }
            if !caps[2].trim().is_empty() {
                lines.push(caps[2].trim_end().to_string());
            }
            current = Some(label);
        } else if let Some(label) = current {
            sections.entry(label).or_default().push(line.trim_end().to_string());
        } else if !line.trim().is_empty() {
            warnings.push(format!("{source}:{}: text before the first section ignored", lineno + 1));
        }
    }

    let joined = |label: Label| -> String {
        sections
            .get(&label)
            .map(|ls| ls.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    };

    let spec_raw = joined(Label::Spec);
    if spec_raw.is_empty() {
        return Err(fail("missing `Spec:` section".into()));
    }
    let spec_id = SpecId::parse(&spec_raw).map_err(|e| fail(e.to_string()))?;

    let summary_items = split_items(sections.get(&Label::Summary).map(Vec::as_slice).unwrap_or_default());
    if summary_items.is_empty() {
        return Err(fail("missing `Summary of change:` section".into()));
    }

    let mut tdoc_id = joined(Label::TDoc);
    if tdoc_id.is_empty() {
        tdoc_id = Path::new(source).file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    }
    if tdoc_id.is_empty() || tdoc_id.contains(char::is_whitespace) {
        return Err(fail(format!("unusable tdoc id {tdoc_id:?}")));
    }

    let reason = joined(Label::Reason);
    if reason.is_empty() {
        warnings.push(format!("{source}: missing `Reason for change:`"));
    }
    let consequence = joined(Label::Consequence);
    if consequence.is_empty() {
        warnings.push(format!("{source}: missing `Consequences if not approved:`"));
    }

    let date_raw = joined(Label::Date);
    let date = if date_raw.is_empty() {
        None
    } else {
        match NaiveDate::parse_from_str(&date_raw, "%Y-%m-%d") {
            Ok(d) => Some(d),
            Err(_) => {
                warnings.push(format!("{source}: unreadable date {date_raw:?}"));
                None
            }
        }
    };

    let mut clauses_affected = Vec::new();
    for token in joined(Label::Clauses).split(|c: char| c == ',' || c == ';' || c.is_whitespace()) {
        let token = token.trim().trim_end_matches('.');
        if token.is_empty() {
            continue;
        }
        match ClauseId::parse(token) {
            Ok(id) => clauses_affected.push(id),
            Err(_) => warnings.push(format!("{source}: ignoring {token:?} in `Clauses affected:`")),
        }
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedCr {
        document: CrDocument {
            tdoc_id,
            spec_id,
            cr_number: joined(Label::Cr),
            title: joined(Label::Title),
            meeting: joined(Label::Meeting),
            date,
            summary_items,
            reason,
            consequence,
            clauses_affected,
            status: joined(Label::Status),
        },
        warnings,
    })
}

/// Splits summary lines on `-`, `*` and `N)` markers; unmarked lines continue the current item.
fn split_items(lines: &[String]) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut open = false;
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(caps) = item_marker_re().captures(line) {
            items.push(caps[1].trim().to_string());
            open = true;
        } else if open {
            let last = items.last_mut().expect("open item");
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(trimmed);
        } else {
            items.push(trimmed.to_string());
            open = true;
        }
    }
    items.retain(|i| !i.is_empty());
    items
}

/// Parses every `*.txt` file in `dir`, in file-name order.
pub fn load_cr_dir(dir: &Path) -> Result<Vec<ParsedCr>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            files.push(path);
        }
    }
    files.sort();
    par::try_map(&files, |path| {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_cr(&text, &path.display().to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrChunk {
    pub chunk_uid: String,
    pub tdoc_id: String,
    pub spec_id: SpecId,
    pub date: Option<NaiveDate>,
    pub change_text: String,
    pub reason: String,
    pub consequence: String,
}

impl CrChunk {
    pub fn embedding_text(&self) -> String {
        format!("{} {}\nReason: {}\nConsequence: {}", self.spec_id, self.change_text, self.reason, self.consequence)
    }
}

/// Candidate restriction for TDoc ranking. An empty list means no restriction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TdocFilter {
    pub spec_ids: Vec<SpecId>,
}

impl TdocFilter {
    pub fn specs(spec_ids: impl IntoIterator<Item = SpecId>) -> Self {
        TdocFilter { spec_ids: spec_ids.into_iter().collect() }
    }

    pub fn accepts(&self, chunk: &CrChunk) -> bool {
        self.spec_ids.is_empty() || self.spec_ids.contains(&chunk.spec_id)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TdocBuildOptions {
    /// Drop CRs whose summary, reason and consequence are all under [`TRIVIAL_WORDS`].
    pub drop_trivial: bool,
}

pub const CHUNKS_FILE: &str = "chunks.jsonl";

#[derive(Debug, Clone)]
pub struct TdocDb {
    chunks: Vec<CrChunk>,
    by_uid: HashMap<String, usize>,
    by_spec: BTreeMap<SpecId, Vec<usize>>,
    index: VectorIndex,
}

impl TdocDb {
    pub fn build(crs: &[CrDocument], embedder: &dyn Embedder) -> Result<Self> {
        Self::build_with(crs, embedder, TdocBuildOptions::default())
    }

    pub fn build_with(crs: &[CrDocument], embedder: &dyn Embedder, options: TdocBuildOptions) -> Result<Self> {
        let mut seen = HashSet::new();
        let dups: Vec<String> = crs.iter().filter(|c| !seen.insert(&c.tdoc_id)).map(|c| c.tdoc_id.clone()).collect();
        if !dups.is_empty() {
            return Err(Error::Duplicate(dups));
        }
        let mut chunks = Vec::new();
        for cr in crs {
            if options.drop_trivial && cr.is_trivial(TRIVIAL_WORDS) {
                log::info!("dropping trivial CR {}", cr.tdoc_id);
                continue;
            }
            for (i, item) in cr.summary_items.iter().enumerate() {
                chunks.push(CrChunk {
                    chunk_uid: format!("{}#{}", cr.tdoc_id, i + 1),
                    tdoc_id: cr.tdoc_id.clone(),
                    spec_id: cr.spec_id.clone(),
                    date: cr.date,
                    change_text: item.clone(),
                    reason: cr.reason.clone(),
                    consequence: cr.consequence.clone(),
                });
            }
        }
        let texts: Vec<String> = chunks.iter().map(CrChunk::embedding_text).collect();
        let vectors = if texts.is_empty() { Vec::new() } else { embedder.embed(&texts)? };
        let dim = vectors.first().map_or(embedder.dim(), |v| v.dim());
        let mut index = VectorIndex::new(dim);
        for (c, v) in chunks.iter().zip(&vectors) {
            index.add(c.chunk_uid.clone(), v)?;
        }
        Self::assemble(chunks, index)
    }

    fn assemble(chunks: Vec<CrChunk>, index: VectorIndex) -> Result<Self> {
        let mut by_uid = HashMap::with_capacity(chunks.len());
        let mut by_spec: BTreeMap<SpecId, Vec<usize>> = BTreeMap::new();
        for (i, c) in chunks.iter().enumerate() {
            if by_uid.insert(c.chunk_uid.clone(), i).is_some() {
                return Err(Error::Duplicate(vec![c.chunk_uid.clone()]));
            }
            by_spec.entry(c.spec_id.clone()).or_default().push(i);
        }
        Ok(TdocDb { chunks, by_uid, by_spec, index })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[CrChunk] {
        &self.chunks
    }

    pub fn chunk(&self, uid: &str) -> Option<&CrChunk> {
        self.by_uid.get(uid).map(|&i| &self.chunks[i])
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    /// Uids passing `filter`, via the spec index when the filter names specs.
    pub fn filtered(&self, filter: &TdocFilter) -> Vec<&str> {
        if filter.spec_ids.is_empty() {
            return self.chunks.iter().map(|c| c.chunk_uid.as_str()).collect();
        }
        let mut rows: Vec<usize> = filter.spec_ids.iter().filter_map(|s| self.by_spec.get(s)).flatten().copied().collect();
        rows.sort_unstable();
        rows.dedup();
        rows.into_iter().map(|i| self.chunks[i].chunk_uid.as_str()).collect()
    }

    pub fn filter_and_rank_tdocs(
        &self,
        embedder: &dyn Embedder,
        spec_ids: &[SpecId],
        query: &str,
        top_k: usize,
    ) -> Result<Vec<ScoredHit>> {
        let filter = TdocFilter::specs(spec_ids.iter().cloned());
        let candidates = self.filtered(&filter);
        if candidates.is_empty() || top_k == 0 {
            return Ok(Vec::new());
        }
        let q = embedder.embed_one(query)?;
        self.rank_vector(&filter, q.as_slice(), top_k)
    }

    pub fn rank_vector(&self, filter: &TdocFilter, query: &[f32], top_k: usize) -> Result<Vec<ScoredHit>> {
        self.index.search_among(query, self.filtered(filter), top_k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::corpus::write_jsonl_file(&dir.join(CHUNKS_FILE), &self.chunks)?;
        vecfile::write(&dir.join(crate::spec_db::VECTORS_FILE), self.index.dim(), self.index.data())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let chunks: Vec<CrChunk> = crate::corpus::read_jsonl_file(&dir.join(CHUNKS_FILE))?;
        let (dim, count, data) = vecfile::read(&dir.join(crate::spec_db::VECTORS_FILE))?;
        if count != chunks.len() {
            return Err(Error::Parse(format!("{}: {count} vectors for {} chunks", dir.display(), chunks.len())));
        }
        let uids = chunks.iter().map(|c| c.chunk_uid.clone()).collect();
        Self::assemble(chunks, VectorIndex::from_rows(dim, uids, data)?)
    }
}
