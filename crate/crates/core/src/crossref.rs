//! Citation extraction and recursive resolution against the clause store.
//!
//! Recognized forms (case-insensitive; `C` a clause number or list of them,
//! `S` a spec number):
//!
//! * `clause C of TS S`, `subclause C in TS S`
//! * `TS S, clause C`, `TS S [12] clause C`
//! * bare `clause C`, resolved within the citing spec
//! * bare `TS S` or `TS S [n]`, a document-level citation
//!
//! `clause C of [n]` points at a bibliography entry and yields nothing.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClauseChunk, ClauseId, SpecId};
use crate::embedding::{Embedder, ScoredHit};
use crate::error::Result;
use crate::par;
use crate::spec_db::{SpecDb, VersionPolicy};

/// Location of a citation: line index into [`ClauseChunk::text_lines`]
/// (0 is the heading) and a char range within that line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub spec_id: SpecId,
    /// `None` for a citation of a whole specification.
    pub clause_id: Option<ClauseId>,
    pub source_chunk_uid: String,
    pub span: Span,
}

const CLAUSE: &str = r"(?:\d{1,3}(?:\.\d{1,3})*|(?-i:[A-Z])(?:\.\d{1,3})+)\b";
const SPEC: &str = r"\d{2}\.?\d{3}\b";

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let clist = format!(r"{CLAUSE}(?:\s*,\s*(?:and\s+|or\s+)?{CLAUSE}|\s+(?:and|or|to)\s+{CLAUSE})*");
        let kw = r"\b(?:sub)?clauses?";
        let ts = r"\bT[SR]\s*";
        let bracket = r"(?:\s*\[\d+\])?";
        let pattern = format!(
            "(?i)\
             (?P<a>{kw}\\s+(?P<a_c>{clist})\\s+(?:of|in)\\s+(?:3GPP\\s+)?{ts}(?P<a_s>{SPEC}){bracket})\
             |(?P<e>{kw}\\s+{clist}\\s+(?:of|in)\\s+\\[\\d+\\])\
             |(?P<b>{ts}(?P<b_s>{SPEC}){bracket}\\s*,?\\s*{kw}\\s+(?P<b_c>{clist}))\
             |(?P<c>{kw}\\s+(?P<c_c>{clist}))\
             |(?P<d>{ts}(?P<d_s>{SPEC}){bracket})"
        );
        Regex::new(&pattern).unwrap()
    })
}

fn clause_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!("(?i){CLAUSE}")).unwrap())
}

/// Raw `(spec, clause)` citations in one line of text, before dedup.
/// Bare clause citations take `own_spec`.
fn scan_line(line: &str, own_spec: &SpecId) -> Vec<(SpecId, Option<ClauseId>, usize, usize)> {
    let mut out = Vec::new();
    for caps in citation_re().captures_iter(line) {
        let whole = caps.get(0).expect("match");
        let (start, end) = (line[..whole.start()].chars().count(), line[..whole.end()].chars().count());
        let (spec, clauses) = if caps.name("a").is_some() {
            (SpecId::parse(&caps["a_s"]).ok(), Some(&caps["a_c"]))
        } else if caps.name("b").is_some() {
            (SpecId::parse(&caps["b_s"]).ok(), Some(&caps["b_c"]))
        } else if caps.name("c").is_some() {
            (Some(own_spec.clone()), Some(&caps["c_c"]))
        } else if caps.name("d").is_some() {
            (SpecId::parse(&caps["d_s"]).ok(), None)
        } else {
            continue;
        };
        let Some(spec) = spec else { continue };
        match clauses {
            Some(list) => {
                for tok in clause_token_re().find_iter(list) {
                    if let Ok(id) = ClauseId::parse(&tok.as_str().to_ascii_uppercase()) {
                        out.push((spec.clone(), Some(id), start, end));
                    }
                }
            }
            None => out.push((spec, None, start, end)),
        }
    }
    out
}

/// Citations in a chunk's heading and body.
///
/// Repeated pairs keep their first span. Citations of the chunk itself or of
/// its own spec as a whole are dropped, as is a document-level citation when
/// the chunk also cites a clause of that spec.
pub fn extract_references(chunk: &ClauseChunk) -> Vec<Reference> {
    let mut seen: HashSet<(SpecId, Option<ClauseId>)> = HashSet::new();
    let mut refs = Vec::new();
    for (line_no, line) in chunk.text_lines().enumerate() {
        for (spec_id, clause_id, start, end) in scan_line(line, &chunk.spec_id) {
            if spec_id == chunk.spec_id && clause_id.as_ref().is_none_or(|c| *c == chunk.clause_id) {
                continue;
            }
            if seen.insert((spec_id.clone(), clause_id.clone())) {
                refs.push(Reference {
                    spec_id,
                    clause_id,
                    source_chunk_uid: chunk.chunk_uid.clone(),
                    span: Span { line: line_no, start, end },
                });
            }
        }
    }
    let clause_specs: HashSet<SpecId> =
        refs.iter().filter(|r| r.clause_id.is_some()).map(|r| r.spec_id.clone()).collect();
    refs.retain(|r| r.clause_id.is_some() || !clause_specs.contains(&r.spec_id));
    refs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub chunk_uid: String,
    pub spec_id: SpecId,
    pub clause_id: ClauseId,
    pub depth: usize,
    pub parent_chunk_uid: Option<String>,
    pub via: Option<Reference>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolutionTrace {
    pub nodes: Vec<TraceNode>,
    pub max_depth_used: usize,
    pub warnings: Vec<String>,
}

impl ResolutionTrace {
    pub fn seeds(&self) -> impl Iterator<Item = &TraceNode> {
        self.nodes.iter().filter(|n| n.depth == 0)
    }

    pub fn referenced(&self) -> impl Iterator<Item = &TraceNode> {
        self.nodes.iter().filter(|n| n.depth > 0)
    }

    pub fn contains(&self, uid: &str) -> bool {
        self.nodes.iter().any(|n| n.chunk_uid == uid)
    }
}

/// Breadth-first expansion of the seeds' citations, up to `max_depth` hops.
///
/// A clause already in the trace is never added again, document-level citations
/// are not followed, and citations missing from the store become warnings.
pub fn resolve_references(db: &SpecDb, seeds: &[&ClauseChunk], max_depth: usize, policy: VersionPolicy) -> ResolutionTrace {
    let mut trace = ResolutionTrace::default();
    let mut visited: HashSet<(SpecId, ClauseId)> = HashSet::new();
    let mut frontier: Vec<&ClauseChunk> = Vec::new();
    for &seed in seeds {
        if visited.insert(seed.key()) {
            trace.nodes.push(TraceNode {
                chunk_uid: seed.chunk_uid.clone(),
                spec_id: seed.spec_id.clone(),
                clause_id: seed.clause_id.clone(),
                depth: 0,
                parent_chunk_uid: None,
                via: None,
            });
            frontier.push(seed);
        }
    }

    for depth in 1..=max_depth {
        let extracted = par::map(&frontier, |c| extract_references(c));
        let mut next = Vec::new();
        for (parent, refs) in frontier.iter().zip(extracted) {
            for r in refs {
                let Some(clause_id) = r.clause_id.clone() else { continue };
                if !visited.insert((r.spec_id.clone(), clause_id.clone())) {
                    continue;
                }
                match db.lookup_clause(&r.spec_id, &clause_id, policy) {
                    Ok(target) => {
                        trace.nodes.push(TraceNode {
                            chunk_uid: target.chunk_uid.clone(),
                            spec_id: target.spec_id.clone(),
                            clause_id: target.clause_id.clone(),
                            depth,
                            parent_chunk_uid: Some(parent.chunk_uid.clone()),
                            via: Some(r),
                        });
                        next.push(target);
                    }
                    Err(e) => trace.warnings.push(format!("{}: {e}", parent.chunk_uid)),
                }
            }
        }
        if next.is_empty() {
            break;
        }
        trace.max_depth_used = depth;
        frontier = next;
    }
    trace
}

/// Ranks the non-seed nodes of `trace` by similarity to `query`, keeping `top_k`.
pub fn rank_referenced(
    db: &SpecDb,
    trace: &ResolutionTrace,
    embedder: &dyn Embedder,
    query: &str,
    top_k: usize,
) -> Result<Vec<ScoredHit>> {
    if top_k == 0 || trace.referenced().next().is_none() {
        return Ok(Vec::new());
    }
    let q = embedder.embed_one(query)?;
    rank_referenced_vector(db, trace, q.as_slice(), top_k)
}

pub fn rank_referenced_vector(db: &SpecDb, trace: &ResolutionTrace, query: &[f32], top_k: usize) -> Result<Vec<ScoredHit>> {
    db.index().search_among(query, trace.referenced().map(|n| n.chunk_uid.as_str()), top_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SpecVersion, VersionNumber};
    use chrono::NaiveDate;

    fn chunk(spec: &str, clause: &str, lines: &[&str]) -> ClauseChunk {
        ClauseChunk::new(
            SpecId::parse(spec).unwrap(),
            ClauseId::parse(clause).unwrap(),
            SpecVersion::new(VersionNumber::new(18, 0, 0), NaiveDate::from_ymd_opt(2023, 12, 1).unwrap()),
            "Heading",
            lines.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn pairs(c: &ClauseChunk) -> Vec<(String, Option<String>)> {
        extract_references(c).into_iter().map(|r| (r.spec_id.to_string(), r.clause_id.map(|c| c.to_string()))).collect()
    }

    fn p(s: &str, c: Option<&str>) -> (String, Option<String>) {
        (s.to_string(), c.map(str::to_string))
    }

    #[test]
    fn cross_document_clause() {
        let c = chunk("38.211", "7.4.1", &["See clause 5.1.6.4 of TS 38.214."]);
        assert_eq!(pairs(&c), [p("38.214", Some("5.1.6.4"))]);
    }

    #[test]
    fn same_document_clause() {
        let c = chunk("38.211", "7.4.1", &["as defined in clause 6.3.2"]);
        assert_eq!(pairs(&c), [p("38.211", Some("6.3.2"))]);
    }

    #[test]
    fn document_level_subsumed_by_clause_level() {
        let c = chunk("38.211", "7.4.1", &["specified in TS 38.331 [12], clause 5.3.3, and TS 38.331 [12]"]);
        assert_eq!(pairs(&c), [p("38.331", Some("5.3.3"))]);
        let c = chunk("38.211", "7.4.1", &["see TS 38.331 [12]"]);
        assert_eq!(pairs(&c), [p("38.331", None)]);
    }

    #[test]
    fn lists_and_case() {
        let c = chunk("38.213", "9", &["According to Clauses 9.2.1 and 9.2.3 in ts 38.214, and subclause A.2"]);
        assert_eq!(pairs(&c), [p("38.214", Some("9.2.1")), p("38.214", Some("9.2.3")), p("38.213", Some("A.2"))]);
    }

    #[test]
    fn self_and_bibliography_citations_dropped() {
        let c = chunk("38.213", "9.2", &["this clause 9.2 refers to clause 4.1 of [5]"]);
        assert!(pairs(&c).is_empty());
    }

    #[test]
    fn spans_point_at_the_match() {
        let c = chunk("38.211", "7.4.1", &["x", "Note: see clause 5.1 of TS 38.214 for details"]);
        let r = &extract_references(&c)[0];
        assert_eq!(r.span.line, 2);
        let line: Vec<char> = c.body[1].chars().collect();
        let text: String = line[r.span.start..r.span.end].iter().collect();
        assert_eq!(text, "clause 5.1 of TS 38.214");
    }
}
