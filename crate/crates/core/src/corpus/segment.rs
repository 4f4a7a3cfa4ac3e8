use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{ClauseChunk, ClauseId, RawDocument};

/// Chunks of one document plus anything odd noticed while splitting it.
#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub chunks: Vec<ClauseChunk>,
    pub warnings: Vec<String>,
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(\d{1,2}(?:\.\d{1,3})*|[A-Z](?:\.\d{1,3})+)[ \t]+(\S.*?)\s*$").unwrap()
    })
}

fn toc_tail_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:\t|\.{3,}\s*)\d+$").unwrap())
}

// First words that mark "5.1 dB"-style numeric text rather than a clause title.
const UNIT_WORDS: &[&str] = &[
    "Hz", "KHz", "MHz", "GHz", "THz", "W", "MW", "GW", "K", "V", "A", "dB", "dBm", "dBi", "ms", "OFDM",
];

/// Recognises a clause heading line, returning its id and title.
///
/// A heading starts at column 0 with a clause id, whitespace, then a title
/// that starts with an uppercase letter, is not a unit, and does not end in
/// sentence punctuation. Table-of-contents lines ending in page numbers are
/// rejected.
pub fn parse_heading(line: &str) -> Option<(ClauseId, &str)> {
    let caps = heading_re().captures(line)?;
    let title = caps.get(2)?.as_str();
    if !title.chars().next()?.is_uppercase() {
        return None;
    }
    let first_word = title.split_whitespace().next()?;
    if UNIT_WORDS.contains(&first_word) {
        return None;
    }
    if title.ends_with(['.', ',', ';', ':', '=', '+', '(', '-']) {
        return None;
    }
    if toc_tail_re().is_match(title) {
        return None;
    }
    let id = ClauseId::parse(caps.get(1)?.as_str()).ok()?;
    if id == ClauseId::prologue() {
        return None;
    }
    Some((id, title))
}

/// Splits a document into clause chunks in document order.
///
/// Every heading owns the lines up to the next heading, so leaf clauses get
/// their whole text and parent clauses keep only their directly-owned lines.
/// Lines before the first heading go to the synthetic clause `0`. A heading
/// whose id already occurred in the document is kept as a body line.
pub fn segment_clauses(doc: &RawDocument) -> Segmentation {
    let mut out = Segmentation::default();
    if doc.lines.is_empty() {
        return out;
    }

    let mut seen: HashSet<ClauseId> = HashSet::new();
    let mut current: Option<(ClauseId, String, Vec<String>)> = None;
    let mut prologue: Vec<String> = Vec::new();

    for (lineno, line) in doc.lines.iter().enumerate() {
        let heading = parse_heading(line).filter(|(id, _)| {
            if seen.contains(id) {
                out.warnings.push(format!(
                    "{}:{}: repeated heading {id}; kept as body text",
                    doc.source_path,
                    lineno + 1
                ));
                false
            } else {
                true
            }
        });
        match heading {
            Some((id, title)) => {
                if let Some((cid, head, body)) = current.take() {
                    out.chunks.push(doc.chunk(cid, head, body));
                }
                seen.insert(id.clone());
                current = Some((id, title.to_string(), Vec::new()));
            }
            None => match current.as_mut() {
                Some((_, _, body)) => body.push(line.clone()),
                None => prologue.push(line.clone()),
            },
        }
    }
    if let Some((cid, head, body)) = current.take() {
        out.chunks.push(doc.chunk(cid, head, body));
    }

    if seen.is_empty() {
        out.warnings.push(format!("{}: no clause headings detected", doc.source_path));
    }
    if !prologue.is_empty() {
        out.chunks.insert(0, doc.chunk(ClauseId::prologue(), String::new(), prologue));
    }
    for w in &out.warnings {
        log::warn!("{w}");
    }
    out
}

impl RawDocument {
    fn chunk(&self, clause_id: ClauseId, heading: String, body: Vec<String>) -> ClauseChunk {
        ClauseChunk::new(self.spec_id.clone(), clause_id, self.version, heading, body)
    }
}
