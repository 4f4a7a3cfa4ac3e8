//! End-to-end question answering over the three stores.
//!
//! Stages: query expansion, top-`k1` clause retrieval, citation resolution
//! with top-`k2` re-ranking, evolution retrieval (changes, then top-`k3` CR
//! chunks), prompt assembly and generation.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::change_db::ChangeDb;
use crate::corpus::{ClauseChunk, SpecId};
use crate::crossref::{rank_referenced_vector, resolve_references, ResolutionTrace};
use crate::embedding::{citation_tag, Embedder, Generator, ScoredHit};
use crate::error::{Error, Result};
use crate::par;
use crate::spec_db::{SpecDb, VersionPolicy};
use crate::tdoc_db::{CrChunk, TdocDb, TdocFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    #[serde(alias = "depth")]
    pub max_depth: usize,
    pub hyde_enabled: bool,
    pub version_policy: VersionPolicy,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { k1: 4, k2: 3, k3: 3, max_depth: 2, hyde_enabled: true, version_policy: VersionPolicy::Latest }
    }
}

pub const HYDE_TEMPLATE: &str =
    "Write a short technical passage, in the style of a 5G specification, that would answer: {query}";

/// Outcome of query expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// Text used for retrieval: the generated passage, or the query itself.
    pub text: String,
    pub generated: bool,
    pub warning: Option<String>,
}

/// Hypothetical-answer expansion of `query`; passthrough for offline generators or on failure.
pub fn hyde_expand(query: &str, generator: &dyn Generator) -> Result<Expansion> {
    if query.trim().is_empty() {
        return Err(Error::InvalidInput("empty query".into()));
    }
    let passthrough = |warning| Expansion { text: query.to_string(), generated: false, warning };
    if generator.is_passthrough() {
        return Ok(passthrough(None));
    }
    match generator.generate(&HYDE_TEMPLATE.replace("{query}", query)) {
        Ok(text) if !text.trim().is_empty() => Ok(Expansion { text, generated: true, warning: None }),
        Ok(_) => Ok(passthrough(Some("query expansion returned empty text; using the query".into()))),
        Err(e) => Ok(passthrough(Some(format!("query expansion failed ({e}); using the query")))),
    }
}

fn spec_mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:\bT[SR]\s*|\b)(\d{2})\.(\d{3})\b|(?:\bT[SR]\s*|\b)(\d{5})\b").unwrap())
}

/// Spec ids named in `query` (`TS 38.213`, `38.213`, `38213`), deduplicated in order.
pub fn extract_spec_mentions(query: &str) -> Vec<SpecId> {
    let mut out: Vec<SpecId> = Vec::new();
    for caps in spec_mention_re().captures_iter(query) {
        let raw = match (caps.get(1), caps.get(2), caps.get(3)) {
            (Some(s), Some(n), _) => format!("{}.{}", s.as_str(), n.as_str()),
            (_, _, Some(c)) => c.as_str().to_string(),
            _ => continue,
        };
        if let Ok(id) = SpecId::parse(&raw) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

/// Extra spec-id extractor, e.g. a model-backed one.
pub type MentionExtractor<'a> = &'a dyn Fn(&str) -> Vec<SpecId>;

/// Rule-based mentions, extended (never replaced) by an optional extra extractor.
pub fn extract_spec_mentions_with(query: &str, extra: Option<MentionExtractor<'_>>) -> Vec<SpecId> {
    let mut out = extract_spec_mentions(query);
    if let Some(extra) = extra {
        for id in extra(query) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionHits {
    /// Spec ids used to filter CR chunks; empty means unfiltered.
    pub spec_filter: Vec<SpecId>,
    pub change_hits: Vec<ScoredHit>,
    pub tdoc_hits: Vec<ScoredHit>,
}

/// Spec ids come from the query; failing that, from the best-matching change entry.
/// CR chunks passing the filter are ranked against `query_vector`.
pub fn evolution_retrieve(
    query: &str,
    query_vector: &[f32],
    k3: usize,
    change_db: &ChangeDb,
    tdoc_db: &TdocDb,
) -> Result<EvolutionHits> {
    let mut hits = EvolutionHits::default();
    if k3 == 0 {
        return Ok(hits);
    }
    hits.spec_filter = extract_spec_mentions(query);
    if hits.spec_filter.is_empty() && !change_db.is_empty() {
        hits.change_hits = change_db.index().search(query_vector, k3)?;
        if let Some(top) = hits.change_hits.first() {
            let entry = change_db.entry(&top.item_uid).ok_or_else(|| Error::UnknownUid(top.item_uid.clone()))?;
            hits.spec_filter.push(entry.spec_id.clone());
        }
    }
    if !tdoc_db.is_empty() {
        hits.tdoc_hits = tdoc_db.rank_vector(&TdocFilter::specs(hits.spec_filter.iter().cloned()), query_vector, k3)?;
    }
    Ok(hits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSection {
    Initial,
    Referenced,
    Evolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextChunk {
    pub section: ContextSection,
    pub chunk_uid: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub expansion: Duration,
    pub initial: Duration,
    pub resolution: Duration,
    pub evolution: Duration,
    pub generation: Duration,
}

/// Everything a query produced. Timings are left out of the JSON form so
/// repeated runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub question: String,
    pub answer: Option<String>,
    pub hyde_text: Option<String>,
    pub context_chunks: Vec<ContextChunk>,
    pub resolution_trace: ResolutionTrace,
    pub spec_filter: Vec<SpecId>,
    pub change_hits: Vec<ScoredHit>,
    pub tdoc_hits: Vec<ScoredHit>,
    pub prompt: String,
    pub warnings: Vec<String>,
    pub failures: Vec<StageFailure>,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl QueryResult {
    pub fn section(&self, section: ContextSection) -> impl Iterator<Item = &ContextChunk> {
        self.context_chunks.iter().filter(move |c| c.section == section)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.answer.is_some()
    }
}

/// Prompt layout with `{initial}`, `{referenced}`, `{evolution}` and `{question}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate(String);

pub const DEFAULT_PROMPT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate(DEFAULT_PROMPT_TEMPLATE.to_string())
    }
}

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{(initial|referenced|evolution|question)\}").unwrap())
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if !text.contains("{question}") {
            return Err(Error::Config("prompt template has no {question} slot".into()));
        }
        Ok(PromptTemplate(text))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::new(std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Fills every slot in one pass, so slot-like text inside values is left alone.
    pub fn render(&self, initial: &str, referenced: &str, evolution: &str, question: &str) -> String {
        slot_re()
            .replace_all(&self.0, |caps: &regex::Captures| match &caps[1] {
                "initial" => initial.to_string(),
                "referenced" => referenced.to_string(),
                "evolution" => evolution.to_string(),
                _ => question.to_string(),
            })
            .into_owned()
    }
}

pub fn render_clause(chunk: &ClauseChunk) -> String {
    let mut out = format!(
        "{} TS {} clause {}, version {} ({}): {}",
        citation_tag(&chunk.chunk_uid),
        chunk.spec_id,
        chunk.clause_id,
        chunk.version.number,
        chunk.version.date,
        chunk.heading
    );
    for line in &chunk.body {
        out.push('\n');
        out.push_str(line);
    }
    out
}

pub fn render_cr(chunk: &CrChunk) -> String {
    let date = chunk.date.map(|d| format!(", {d}")).unwrap_or_default();
    format!(
        "{} CR {} to TS {}{date}\nChange: {}\nReason: {}\nConsequence: {}",
        citation_tag(&chunk.chunk_uid),
        chunk.tdoc_id,
        chunk.spec_id,
        chunk.change_text,
        chunk.reason,
        chunk.consequence
    )
}

fn render_section(parts: Vec<String>) -> String {
    if parts.is_empty() {
        "(none)".to_string()
    } else {
        parts.join("\n\n")
    }
}

/// The three stores plus providers. Immutable; one instance serves concurrent queries.
pub struct Pipeline<'a> {
    pub spec_db: &'a SpecDb,
    pub change_db: &'a ChangeDb,
    pub tdoc_db: &'a TdocDb,
    pub embedder: &'a dyn Embedder,
    pub generator: &'a dyn Generator,
    pub template: PromptTemplate,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        spec_db: &'a SpecDb,
        change_db: &'a ChangeDb,
        tdoc_db: &'a TdocDb,
        embedder: &'a dyn Embedder,
        generator: &'a dyn Generator,
    ) -> Self {
        Pipeline { spec_db, change_db, tdoc_db, embedder, generator, template: PromptTemplate::default() }
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    /// Runs every stage. Provider failures are recorded in `failures` and leave
    /// `answer` empty; only an empty question is an error.
    pub fn answer_query(&self, question: &str, config: &RetrievalConfig) -> Result<QueryResult> {
        if question.trim().is_empty() {
            return Err(Error::InvalidInput("empty question".into()));
        }
        let mut result = QueryResult {
            question: question.to_string(),
            answer: None,
            hyde_text: None,
            context_chunks: Vec::new(),
            resolution_trace: ResolutionTrace::default(),
            spec_filter: Vec::new(),
            change_hits: Vec::new(),
            tdoc_hits: Vec::new(),
            prompt: String::new(),
            warnings: Vec::new(),
            failures: Vec::new(),
            timings: StageTimings::default(),
        };

        let t = Instant::now();
        let retrieval_text = if config.hyde_enabled {
            let exp = hyde_expand(question, self.generator)?;
            result.warnings.extend(exp.warning);
            if exp.generated {
                result.hyde_text = Some(exp.text.clone());
            }
            exp.text
        } else {
            question.to_string()
        };
        result.timings.expansion = t.elapsed();

        let vectors = match self.embedder.embed(&[retrieval_text.clone(), question.to_string()]) {
            Ok(v) if v.len() == 2 => v,
            Ok(_) => return Ok(self.fail(result, "embed", "provider returned the wrong number of vectors")),
            Err(e) => return Ok(self.fail(result, "embed", e)),
        };
        let (retrieval_vec, question_vec) = (vectors[0].as_slice(), vectors[1].as_slice());

        let t = Instant::now();
        let initial = if self.spec_db.is_empty() {
            Vec::new()
        } else {
            match self.spec_db.search_vector(retrieval_vec, config.k1, config.version_policy) {
                Ok(h) => h,
                Err(e) => return Ok(self.fail(result, "initial_retrieval", e)),
            }
        };
        result.timings.initial = t.elapsed();

        let seeds: Vec<&ClauseChunk> = initial.iter().filter_map(|h| self.spec_db.chunk(&h.item_uid)).collect();
        let ((trace, referenced, t_res), (evolution, t_evo)) = par::join(
            || {
                let t = Instant::now();
                let trace = resolve_references(self.spec_db, &seeds, config.max_depth, config.version_policy);
                let referenced = if config.k2 == 0 {
                    Ok(Vec::new())
                } else {
                    rank_referenced_vector(self.spec_db, &trace, question_vec, config.k2)
                };
                (trace, referenced, t.elapsed())
            },
            || {
                let t = Instant::now();
                let hits = evolution_retrieve(question, retrieval_vec, config.k3, self.change_db, self.tdoc_db);
                (hits, t.elapsed())
            },
        );
        result.timings.resolution = t_res;
        result.timings.evolution = t_evo;
        result.warnings.extend(trace.warnings.iter().cloned());
        result.resolution_trace = trace;

        let referenced = referenced.unwrap_or_else(|e| {
            result.failures.push(StageFailure { stage: "reference_ranking".into(), message: e.to_string() });
            Vec::new()
        });
        let evolution = evolution.unwrap_or_else(|e| {
            result.failures.push(StageFailure { stage: "evolution".into(), message: e.to_string() });
            EvolutionHits::default()
        });

        let push = |out: &mut Vec<ContextChunk>, section, hits: &[ScoredHit]| {
            out.extend(hits.iter().map(|h| ContextChunk { section, chunk_uid: h.item_uid.clone(), score: h.score }));
        };
        push(&mut result.context_chunks, ContextSection::Initial, &initial);
        push(&mut result.context_chunks, ContextSection::Referenced, &referenced);
        push(&mut result.context_chunks, ContextSection::Evolution, &evolution.tdoc_hits);
        result.spec_filter = evolution.spec_filter;
        result.change_hits = evolution.change_hits;
        result.tdoc_hits = evolution.tdoc_hits;

        let clauses = |hits: &[ScoredHit]| -> Vec<String> {
            hits.iter().filter_map(|h| self.spec_db.chunk(&h.item_uid)).map(render_clause).collect()
        };
        let crs: Vec<String> =
            result.tdoc_hits.iter().filter_map(|h| self.tdoc_db.chunk(&h.item_uid)).map(render_cr).collect();
        result.prompt = self.template.render(
            &render_section(clauses(&initial)),
            &render_section(clauses(&referenced)),
            &render_section(crs),
            question,
        );

        if result.failures.is_empty() {
            let t = Instant::now();
            match self.generator.generate(&result.prompt) {
                Ok(answer) => result.answer = Some(answer),
                Err(e) => result.failures.push(StageFailure { stage: "generate".into(), message: e.to_string() }),
            }
            result.timings.generation = t.elapsed();
        }
        Ok(result)
    }

    fn fail(&self, mut result: QueryResult, stage: &str, err: impl std::fmt::Display) -> QueryResult {
        result.failures.push(StageFailure { stage: stage.into(), message: err.to_string() });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::NullGenerator;

    struct Fixed(Result<String>);

    impl Generator for Fixed {
        fn generate(&self, _: &str) -> Result<String> {
            match &self.0 {
                Ok(s) => Ok(s.clone()),
                Err(_) => Err(Error::Provider { status: Some(503), message: "down".into() }),
            }
        }
    }

    #[test]
    fn defaults() {
        let c = RetrievalConfig::default();
        assert_eq!((c.k1, c.k2, c.k3, c.max_depth), (4, 3, 3, 2));
        assert!(c.hyde_enabled);
        assert_eq!(c.version_policy, VersionPolicy::Latest);
    }

    #[test]
    fn hyde_passthrough_and_fallback() {
        let q = "How is PUCCH repetition counted?";
        let e = hyde_expand(q, &NullGenerator::default()).unwrap();
        assert_eq!((e.text.as_str(), e.generated), (q, false));

        let e = hyde_expand(q, &Fixed(Ok("T".into()))).unwrap();
        assert_eq!((e.text.as_str(), e.generated), ("T", true));

        let e = hyde_expand(q, &Fixed(Err(Error::EmptyText))).unwrap();
        assert_eq!(e.text, q);
        assert!(e.warning.unwrap().contains("503"));

        assert!(hyde_expand(" ", &NullGenerator::default()).is_err());
    }

    #[test]
    fn spec_mentions() {
        let ids = |q: &str| extract_spec_mentions(q).into_iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(ids("Why was the PUCCH repetition rule in TS 38.213 changed?"), ["38.213"]);
        assert!(ids("How does beam failure recovery work?").is_empty());
        assert_eq!(ids("Compare 38.211 and TS 38.214"), ["38.211", "38.214"]);
        assert_eq!(ids("TS38214 vs ts 38.214"), ["38.214"]);
        assert_eq!(ids("TR38912"), ["38.912"]);
        assert!(ids("Release 17.4.0 in 2023").is_empty());
    }

    #[test]
    fn mention_hook_only_adds() {
        let hook = |_: &str| vec![SpecId::parse("38.331").unwrap(), SpecId::parse("38.213").unwrap()];
        let ids = extract_spec_mentions_with("TS 38.213", Some(&hook));
        assert_eq!(ids.iter().map(|s| s.to_string()).collect::<Vec<_>>(), ["38.213", "38.331"]);
    }

    #[test]
    fn template_single_pass() {
        let t = PromptTemplate::new("A:{initial} B:{referenced} C:{evolution} Q:{question}").unwrap();
        assert_eq!(t.render("{question}", "", "x", "q"), "A:{question} B: C:x Q:q");
        assert!(PromptTemplate::new("no slot").is_err());
        assert!(DEFAULT_PROMPT_TEMPLATE.contains("answer the question using only the provided context; cite clause ids")
            || DEFAULT_PROMPT_TEMPLATE.contains("Answer the question using only the provided context; cite clause ids"));
    }
}
