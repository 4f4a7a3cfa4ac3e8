//! Precision/recall/F1 scoring of cross-reference retrieval against a gold set.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClauseId, SpecId};
use crate::crossref::{rank_referenced_vector, resolve_references};
use crate::error::{Error, Result};
use crate::par;
use crate::pipeline::RetrievalConfig;
use crate::spec_db::{SpecDb, VersionPolicy};

pub type Target = (SpecId, ClauseId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Helpful,
    Unhelpful,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRow {
    pub source_chunk_uid: String,
    pub spec_id: SpecId,
    pub clause_id: ClauseId,
    pub label: Label,
}

/// Labeled (source, target) pairs; each pair appears once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldReferenceSet {
    rows: Vec<GoldRow>,
    helpful: BTreeMap<String, BTreeSet<Target>>,
}

impl GoldReferenceSet {
    pub fn new(rows: Vec<GoldRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut dups = Vec::new();
        let mut helpful: BTreeMap<String, BTreeSet<Target>> = BTreeMap::new();
        for r in &rows {
            if !seen.insert((&r.source_chunk_uid, &r.spec_id, &r.clause_id)) {
                dups.push(format!("{} -> {}:{}", r.source_chunk_uid, r.spec_id, r.clause_id));
                continue;
            }
            let set = helpful.entry(r.source_chunk_uid.clone()).or_default();
            if r.label == Label::Helpful {
                set.insert((r.spec_id.clone(), r.clause_id.clone()));
            }
        }
        if !dups.is_empty() {
            return Err(Error::Duplicate(dups));
        }
        Ok(GoldReferenceSet { rows, helpful })
    }

    /// Reads a CSV with header `source_chunk_uid,spec_id,clause_id,label`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |e: csv::Error| Error::ParseFile { path: path.into(), message: e.to_string() };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(parse_err)?;
        let rows = reader.deserialize().collect::<std::result::Result<Vec<GoldRow>, _>>().map_err(parse_err)?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[GoldRow] {
        &self.rows
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.helpful.keys().map(String::as_str)
    }

    pub fn helpful(&self, source: &str) -> Option<&BTreeSet<Target>> {
        self.helpful.get(source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// A zero denominator scores 1 when both sides are empty and 0 otherwise.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize, other_empty: bool| {
            if den == 0 {
                if other_empty { 1.0 } else { 0.0 }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, tp + fn_ == 0);
        let recall = ratio(tp, tp + fn_, tp + fp == 0);
        Prf { precision, recall, f1: f1(precision, recall) }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScore {
    pub source_chunk_uid: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(flatten)]
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub per_source: Vec<SourceScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_tp: usize,
    pub micro_fp: usize,
    pub micro_fn: usize,
    pub micro: Prf,
    pub warnings: Vec<String>,
}

impl PrfReport {
    fn assemble(per_source: Vec<SourceScore>, warnings: Vec<String>) -> Self {
        let n = per_source.len();
        let mean = |f: fn(&Prf) -> f64| {
            if n == 0 {
                1.0
            } else {
                per_source.iter().map(|s| f(&s.scores)).sum::<f64>() / n as f64
            }
        };
        let (tp, fp, fn_) =
            per_source.iter().fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
        PrfReport {
            macro_precision: mean(|p| p.precision),
            macro_recall: mean(|p| p.recall),
            macro_f1: mean(|p| p.f1),
            micro_tp: tp,
            micro_fp: fp,
            micro_fn: fn_,
            micro: Prf::from_counts(tp, fp, fn_),
            per_source,
            warnings,
        }
    }

    /// Plain-text table: one row per source, then macro and micro rows.
    pub fn to_table(&self) -> String {
        let width = self.per_source.iter().map(|s| s.source_chunk_uid.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>4} {:>4} {:>4}  {:>6} {:>6} {:>6}", "source", "tp", "fp", "fn", "P", "R", "F1");
        for s in &self.per_source {
            let _ = writeln!(
                out,
                "{:<width$}  {:>4} {:>4} {:>4}  {:>6.4} {:>6.4} {:>6.4}",
                s.source_chunk_uid, s.tp, s.fp, s.fn_, s.scores.precision, s.scores.recall, s.scores.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>4} {:>4} {:>4}  {:>6.4} {:>6.4} {:>6.4}",
            "macro", "", "", "", self.macro_precision, self.macro_recall, self.macro_f1
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>4} {:>4} {:>4}  {:>6.4} {:>6.4} {:>6.4}",
            "micro", self.micro_tp, self.micro_fp, self.micro_fn, self.micro.precision, self.micro.recall, self.micro.f1
        );
        let _ = writeln!(out, "F1 of macro P and R: {:.4}", f1(self.macro_precision, self.macro_recall));
        out
    }
}

/// Scores retrieved targets per gold source. Gold sources absent from
/// `retrieved` count as empty retrieval; retrieved sources absent from gold are an error.
pub fn score_crossref(retrieved: &BTreeMap<String, Vec<Target>>, gold: &GoldReferenceSet) -> Result<PrfReport> {
    let extra: Vec<String> = retrieved.keys().filter(|s| gold.helpful(s).is_none()).cloned().collect();
    if !extra.is_empty() {
        return Err(Error::InvalidInput(format!("sources not in gold set: {}", extra.join(", "))));
    }
    let sources: Vec<&str> = gold.sources().collect();
    let scored = par::map(&sources, |&src| {
        let mut warnings = Vec::new();
        let list = retrieved.get(src).map(Vec::as_slice).unwrap_or(&[]);
        let got: BTreeSet<&Target> = list.iter().collect();
        if got.len() != list.len() {
            warnings.push(format!("{src}: {} duplicate retrieved pairs ignored", list.len() - got.len()));
        }
        let helpful = gold.helpful(src).expect("source from gold");
        let tp = got.iter().filter(|t| helpful.contains(t)).count();
        let (fp, fn_) = (got.len() - tp, helpful.len() - tp);
        let score = SourceScore { source_chunk_uid: src.to_string(), tp, fp, fn_, scores: Prf::from_counts(tp, fp, fn_) };
        (score, warnings)
    });
    let (per_source, warnings): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    Ok(PrfReport::assemble(per_source, warnings.into_iter().flatten().collect()))
}

/// Retrieval budget for one microbenchmark run. Evolution retrieval is not involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicrobenchConfig {
    pub k1: usize,
    pub k2: usize,
    pub max_depth: usize,
    pub policy: VersionPolicy,
}

impl Default for MicrobenchConfig {
    fn default() -> Self {
        MicrobenchConfig { k1: 3, k2: 2, max_depth: 2, policy: VersionPolicy::Latest }
    }
}

/// Targets retrieved for one source chunk.
///
/// Seeds are the source plus its `k1 - 1` nearest other chunks under the
/// version policy. Retrieved targets are the non-source seeds followed by the
/// `k2` best-ranked referenced chunks, both ranked against the source's vector.
pub fn microbench_retrieve(db: &SpecDb, source_uid: &str, config: &MicrobenchConfig) -> Result<Vec<Target>> {
    let source = db.chunk(source_uid).ok_or_else(|| Error::UnknownUid(source_uid.to_string()))?;
    let qv = db.index().vector(source_uid).ok_or_else(|| Error::UnknownUid(source_uid.to_string()))?;
    let mut seeds = vec![source];
    if config.k1 > 1 {
        let candidates = db.candidates(config.policy).into_iter().filter(|&u| u != source_uid);
        for hit in db.index().search_among(qv, candidates, config.k1 - 1)? {
            seeds.extend(db.chunk(&hit.item_uid));
        }
    }
    let trace = resolve_references(db, &seeds, config.max_depth, config.policy);
    let referenced = rank_referenced_vector(db, &trace, qv, config.k2)?;

    let mut out: Vec<Target> = Vec::new();
    let own = source.key();
    for c in seeds.iter().skip(1) {
        if c.key() != own && !out.contains(&c.key()) {
            out.push(c.key());
        }
    }
    for hit in referenced {
        let c = db.chunk(&hit.item_uid).ok_or_else(|| Error::UnknownUid(hit.item_uid.clone()))?;
        if c.key() != own && !out.contains(&c.key()) {
            out.push(c.key());
        }
    }
    Ok(out)
}

/// Runs [`microbench_retrieve`] for every gold source and scores the result.
pub fn run_microbenchmark(db: &SpecDb, gold: &GoldReferenceSet, config: &MicrobenchConfig) -> Result<PrfReport> {
    let sources: Vec<&str> = gold.sources().collect();
    let lists = par::try_map(&sources, |&s| microbench_retrieve(db, s, config))?;
    let retrieved: BTreeMap<String, Vec<Target>> =
        sources.iter().map(|s| s.to_string()).zip(lists).collect();
    score_crossref(&retrieved, gold)
}

/// Checks that every named configuration has the same total context budget
/// `k1 + k2 + k3`, so compared methods see equally many chunks. Returns that budget.
pub fn check_budget_parity(configs: &[(&str, &RetrievalConfig)]) -> Result<usize> {
    let total = |c: &RetrievalConfig| c.k1.saturating_add(c.k2).saturating_add(c.k3);
    let Some((_, first)) = configs.first() else { return Ok(0) };
    let want = total(first);
    if configs.iter().all(|(_, c)| total(c) == want) {
        return Ok(want);
    }
    let listed: Vec<String> = configs.iter().map(|(n, c)| format!("{n}={}", total(c))).collect();
    Err(Error::InvalidInput(format!("context budgets differ: {}", listed.join(", "))))
}
