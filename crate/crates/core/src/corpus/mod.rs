//! Document, version and clause model plus ingestion and segmentation.

mod ids;
mod ingest;
mod record;
mod segment;

pub use ids::{decode_version, encode_version, ClauseId, Segment, SpecId, SpecVersion, VersionNumber};
pub use ingest::{ingest_corpus, ingest_manifest, parse_corpus_file_name, ManifestRow, RawDocument};
pub use record::{read_chunks_jsonl, write_chunks_jsonl, ChunkRecord};
pub(crate) use record::{read_jsonl as read_jsonl_file, write_jsonl as write_jsonl_file};
pub use segment::{parse_heading, segment_clauses, Segmentation};

use serde::{Deserialize, Serialize};

/// One clause of one version of a specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ChunkRecord", try_from = "ChunkRecord")]
pub struct ClauseChunk {
    pub chunk_uid: String,
    pub spec_id: SpecId,
    pub clause_id: ClauseId,
    pub version: SpecVersion,
    pub heading: String,
    pub body: Vec<String>,
}

impl ClauseChunk {
    pub fn new(
        spec_id: SpecId,
        clause_id: ClauseId,
        version: SpecVersion,
        heading: impl Into<String>,
        body: Vec<String>,
    ) -> Self {
        let chunk_uid = chunk_uid(&spec_id, &clause_id, version.number);
        ClauseChunk { chunk_uid, spec_id, clause_id, version, heading: heading.into(), body }
    }

    /// Text fed to the embedder: ids and heading on the first line, body after.
    pub fn embedding_text(&self) -> String {
        format!("{} {} {}\n{}", self.spec_id, self.clause_id, self.heading, self.body.join("\n"))
    }

    /// Heading followed by body lines; reference spans index into this.
    pub fn text_lines(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.heading.as_str()).chain(self.body.iter().map(String::as_str))
    }

    pub fn key(&self) -> (SpecId, ClauseId) {
        (self.spec_id.clone(), self.clause_id.clone())
    }
}

/// Stable uid for a clause version, e.g. `38.214:5.1.6.4@17.4.0`.
pub fn chunk_uid(spec_id: &SpecId, clause_id: &ClauseId, version: VersionNumber) -> String {
    format!("{spec_id}:{clause_id}@{version}")
}
