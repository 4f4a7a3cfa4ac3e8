mod common;

use std::collections::HashSet;

use chrono::NaiveDate;
use common::{fixture, fixture_dbs, mock};
use serde::Deserialize;
use specrag_core::change_db::ChangeDb;
use specrag_core::corpus::{ClauseChunk, ClauseId, SpecId, SpecVersion, VersionNumber};
use specrag_core::embedding::{EmbeddingVector, Embedder, Generator, NullGenerator};
use specrag_core::pipeline::{extract_spec_mentions, ContextSection, Pipeline, QueryResult, RetrievalConfig};
use specrag_core::spec_db::{SpecDb, VersionPolicy};
use specrag_core::tdoc_db::TdocDb;
use specrag_core::{Error, Result};

const NO_MENTION: &str = "Why was the dynamic PUCCH repetition factor indication introduced?";
const MENTION: &str = "Why was the PUCCH repetition rule in TS 38.213 changed?";

fn run(question: &str, config: &RetrievalConfig) -> QueryResult {
    let dbs = fixture_dbs();
    let (e, g) = (mock(), NullGenerator::default());
    Pipeline::new(&dbs.spec, &dbs.change, &dbs.tdoc, &e, &g).answer_query(question, config).unwrap()
}

fn cfg(k1: usize, k2: usize, k3: usize, depth: usize) -> RetrievalConfig {
    RetrievalConfig { k1, k2, k3, max_depth: depth, ..RetrievalConfig::default() }
}

fn check_invariants(r: &QueryResult, c: &RetrievalConfig) {
    assert!(r.section(ContextSection::Initial).count() <= c.k1);
    assert!(r.section(ContextSection::Referenced).count() <= c.k2);
    assert!(r.section(ContextSection::Evolution).count() <= c.k3);
    let order: Vec<ContextSection> = r.context_chunks.iter().map(|c| c.section).collect();
    assert!(order.windows(2).all(|w| w[0] <= w[1]), "{order:?}");
    let uids: HashSet<&str> = r.context_chunks.iter().map(|c| c.chunk_uid.as_str()).collect();
    assert_eq!(uids.len(), r.context_chunks.len());
}

#[test]
fn defaults_are_deterministic_and_within_budget() {
    let c = RetrievalConfig::default();
    let first = serde_json::to_string(&run(NO_MENTION, &c)).unwrap();
    for _ in 0..4 {
        assert_eq!(serde_json::to_string(&run(NO_MENTION, &c)).unwrap(), first);
    }
    let r = run(NO_MENTION, &c);
    check_invariants(&r, &c);
    assert_eq!(r.section(ContextSection::Initial).count(), 4);
    assert!(r.failures.is_empty());
    assert!(r.answer.as_deref().unwrap().contains("38.213:9.2.6@18.0.0"));
    assert!(!first.contains("timings"));
}

#[test]
fn budgets_hold_across_configs() {
    for k1 in [0, 1, 3, 6] {
        for k2 in [0, 1, 5] {
            for k3 in [0, 2] {
                for depth in [0, 1, 3] {
                    let c = cfg(k1, k2, k3, depth);
                    check_invariants(&run(NO_MENTION, &c), &c);
                    check_invariants(&run(MENTION, &c), &c);
                }
            }
        }
    }
}

#[test]
fn zero_budgets_give_empty_context() {
    let r = run(NO_MENTION, &cfg(0, 0, 0, 2));
    assert!(r.context_chunks.is_empty());
    assert_eq!(r.answer.as_deref(), Some(""));
    assert_eq!(r.prompt.matches("(none)").count(), 3);
    assert!(r.prompt.contains("Answer the question using only the provided context; cite clause ids."));
}

#[test]
fn explicit_mention_skips_change_store() {
    let r = run(MENTION, &RetrievalConfig::default());
    assert!(r.change_hits.is_empty());
    assert_eq!(r.spec_filter, [SpecId::parse("38.213").unwrap()]);
    assert!(!r.tdoc_hits.is_empty());
    let dbs = fixture_dbs();
    for h in &r.tdoc_hits {
        assert_eq!(dbs.tdoc.chunk(&h.item_uid).unwrap().spec_id.to_string(), "38.213");
    }
}

#[test]
fn no_mention_uses_top_change_hit() {
    let r = run(NO_MENTION, &RetrievalConfig::default());
    assert!(!r.change_hits.is_empty());
    assert_eq!(r.change_hits[0].item_uid, "38.213:9.2.6@17.1.0..18.0.0");
    assert_eq!(r.spec_filter, [SpecId::parse("38.213").unwrap()]);
    assert_eq!(r.tdoc_hits[0].item_uid, "R1-2312001#1");
    let dbs = fixture_dbs();
    assert!(r.tdoc_hits.iter().all(|h| dbs.tdoc.chunk(&h.item_uid).unwrap().spec_id.to_string() == "38.213"));
}

#[test]
fn k3_zero_skips_evolution() {
    let r = run(NO_MENTION, &cfg(4, 3, 0, 2));
    assert!(r.change_hits.is_empty() && r.tdoc_hits.is_empty() && r.spec_filter.is_empty());
}

#[test]
fn plain_retrieval_when_other_stages_off() {
    let dbs = fixture_dbs();
    for q in [NO_MENTION, MENTION, "DM-RS sequence generation for PDSCH"] {
        let r = run(q, &cfg(5, 0, 0, 0));
        let direct = dbs.spec.semantic_search(&mock(), q, 5, VersionPolicy::Latest).unwrap();
        let initial: Vec<&str> = r.section(ContextSection::Initial).map(|c| c.chunk_uid.as_str()).collect();
        let want: Vec<&str> = direct.iter().map(|h| h.item_uid.as_str()).collect();
        assert_eq!(initial, want);
        let trace: Vec<&str> = r.resolution_trace.nodes.iter().map(|n| n.chunk_uid.as_str()).collect();
        assert_eq!(trace, want);
        assert_eq!(r.context_chunks.len(), want.len());
    }
}

fn chunk(spec: &str, clause: &str, heading: &str, body: &str) -> ClauseChunk {
    ClauseChunk::new(
        SpecId::parse(spec).unwrap(),
        ClauseId::parse(clause).unwrap(),
        SpecVersion::new(VersionNumber::new(18, 0, 0), NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()),
        heading,
        vec![body.to_string()],
    )
}

#[test]
fn seed_and_cited_clause() {
    let e = mock();
    let spec = SpecDb::build(
        vec![
            chunk("38.213", "9.2.6", "PUCCH repetition", "PUCCH repetition over nrofSlots slots uses the slot format of clause 4.3.2 of TS 38.211."),
            chunk("38.211", "4.3.2", "Slots", "Slots are numbered within a subframe."),
            chunk("38.214", "5.1.3", "Modulation order", "MCS table selection for PDSCH."),
        ],
        &e,
    )
    .unwrap();
    let change = ChangeDb::build(&[], &e).unwrap();
    let tdoc = TdocDb::build(&[], &e).unwrap();
    let g = NullGenerator::default();
    let r = Pipeline::new(&spec, &change, &tdoc, &e, &g)
        .answer_query("How does PUCCH repetition work?", &cfg(1, 1, 0, 2))
        .unwrap();
    let got: Vec<(ContextSection, &str)> = r.context_chunks.iter().map(|c| (c.section, c.chunk_uid.as_str())).collect();
    assert_eq!(
        got,
        [(ContextSection::Initial, "38.213:9.2.6@18.0.0"), (ContextSection::Referenced, "38.211:4.3.2@18.0.0")]
    );
    assert_eq!(r.answer.as_deref(), Some("38.213:9.2.6@18.0.0,38.211:4.3.2@18.0.0"));
}

struct Down;

impl Generator for Down {
    fn generate(&self, _: &str) -> Result<String> {
        Err(Error::Provider { status: Some(503), message: "unavailable".into() })
    }
}

impl Embedder for Down {
    fn dim(&self) -> usize {
        256
    }
    fn embed(&self, _: &[String]) -> Result<Vec<EmbeddingVector>> {
        Err(Error::Provider { status: None, message: "connection refused".into() })
    }
}

#[test]
fn generator_failure_keeps_context() {
    let dbs = fixture_dbs();
    let e = mock();
    let r = Pipeline::new(&dbs.spec, &dbs.change, &dbs.tdoc, &e, &Down)
        .answer_query(NO_MENTION, &RetrievalConfig::default())
        .unwrap();
    assert!(r.answer.is_none());
    assert!(!r.context_chunks.is_empty());
    assert_eq!(r.hyde_text, None);
    assert!(r.warnings.iter().any(|w| w.contains("query expansion failed")), "{:?}", r.warnings);
    let stages: Vec<&str> = r.failures.iter().map(|f| f.stage.as_str()).collect();
    assert_eq!(stages, ["generate"]);
}

#[test]
fn embedder_failure_is_reported() {
    let dbs = fixture_dbs();
    let g = NullGenerator::default();
    let r = Pipeline::new(&dbs.spec, &dbs.change, &dbs.tdoc, &Down, &g)
        .answer_query(NO_MENTION, &RetrievalConfig::default())
        .unwrap();
    assert!(r.answer.is_none() && r.context_chunks.is_empty());
    assert_eq!(r.failures[0].stage, "embed");
}

#[test]
fn empty_question_is_rejected() {
    let dbs = fixture_dbs();
    let (e, g) = (mock(), NullGenerator::default());
    let p = Pipeline::new(&dbs.spec, &dbs.change, &dbs.tdoc, &e, &g);
    assert!(p.answer_query("  ", &RetrievalConfig::default()).is_err());
}

#[derive(Deserialize)]
struct MentionCase {
    query: String,
    specs: Vec<String>,
}

#[test]
fn labeled_spec_mentions() {
    let text = std::fs::read_to_string(fixture("spec_mentions.jsonl")).unwrap();
    let mut n = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let case: MentionCase = serde_json::from_str(line).unwrap();
        let got: Vec<String> = extract_spec_mentions(&case.query).iter().map(ToString::to_string).collect();
        assert_eq!(got, case.specs, "{}", case.query);
        n += 1;
    }
    assert_eq!(n, 20);
}
