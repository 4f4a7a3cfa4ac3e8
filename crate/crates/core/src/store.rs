//! Building the three stores from a corpus and persisting them as one directory.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::change_db::ChangeDb;
use crate::config::EngineConfig;
use crate::corpus::{ingest_corpus, segment_clauses, ClauseChunk};
use crate::embedding::{Embedder, ProviderConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::spec_db::SpecDb;
use crate::tdoc_db::{load_cr_dir, TdocBuildOptions, TdocDb};

pub const SPEC_DIR: &str = "specdb";
pub const CHANGE_DIR: &str = "changedb";
pub const TDOC_DIR: &str = "tdocdb";
pub const META_FILE: &str = "meta.json";

/// Written next to the stores; queries must embed with the same provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub embed: ProviderConfig,
    pub line_budget: usize,
    pub spec_chunks: usize,
    pub change_entries: usize,
    pub cr_chunks: usize,
}

#[derive(Debug, Clone)]
pub struct Databases {
    pub spec: SpecDb,
    pub change: ChangeDb,
    pub tdoc: TdocDb,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub documents: usize,
    pub crs: usize,
    pub warnings: Vec<String>,
    pub elapsed: Duration,
}

/// Segments every document of the corpus into clause chunks.
pub fn chunk_corpus(corpus: &Path) -> Result<(Vec<ClauseChunk>, usize, Vec<String>)> {
    let docs = ingest_corpus(corpus)?;
    let segs = par::map(&docs, segment_clauses);
    let mut chunks = Vec::new();
    let mut warnings = Vec::new();
    for (doc, seg) in docs.iter().zip(segs) {
        warnings.extend(seg.warnings.into_iter().map(|w| format!("{}: {w}", doc.source_path)));
        chunks.extend(seg.chunks);
    }
    Ok((chunks, docs.len(), warnings))
}

/// Ingests `corpus` and optional CR directory `tdocs`, then builds all three stores.
pub fn build_databases(
    corpus: &Path,
    tdocs: Option<&Path>,
    embedder: &dyn Embedder,
    config: &EngineConfig,
) -> Result<(Databases, BuildReport)> {
    let start = Instant::now();
    let (chunks, documents, mut warnings) = chunk_corpus(corpus)?;
    let parsed = match tdocs {
        Some(dir) => load_cr_dir(dir)?,
        None => Vec::new(),
    };
    let mut crs = Vec::with_capacity(parsed.len());
    for p in parsed {
        warnings.extend(p.warnings.into_iter().map(|w| format!("{}: {w}", p.document.tdoc_id)));
        crs.push(p.document);
    }
    let options = TdocBuildOptions { drop_trivial: config.drop_trivial_crs };

    let change = ChangeDb::build_with_budget(&chunks, embedder, config.line_budget)?;
    let (spec, tdoc) = par::join(|| SpecDb::build(chunks, embedder), || TdocDb::build_with(&crs, embedder, options));
    let dbs = Databases { spec: spec?, change, tdoc: tdoc? };
    let report = BuildReport { documents, crs: crs.len(), warnings, elapsed: start.elapsed() };
    Ok((dbs, report))
}

impl Databases {
    pub fn save(&self, dir: &Path, embed: &ProviderConfig) -> Result<()> {
        self.spec.save(&dir.join(SPEC_DIR))?;
        self.change.save(&dir.join(CHANGE_DIR))?;
        self.tdoc.save(&dir.join(TDOC_DIR))?;
        let meta = StoreMeta {
            embed: embed.clone(),
            line_budget: self.change.line_budget(),
            spec_chunks: self.spec.len(),
            change_entries: self.change.len(),
            cr_chunks: self.tdoc.len(),
        };
        let path = dir.join(META_FILE);
        let text = serde_json::to_string_pretty(&meta)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, StoreMeta)> {
        let meta = read_meta(dir)?;
        let dbs = Databases {
            spec: SpecDb::load(&dir.join(SPEC_DIR))?,
            change: ChangeDb::load(&dir.join(CHANGE_DIR), meta.line_budget)?,
            tdoc: TdocDb::load(&dir.join(TDOC_DIR))?,
        };
        Ok((dbs, meta))
    }
}

pub fn read_meta(dir: &Path) -> Result<StoreMeta> {
    let path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
