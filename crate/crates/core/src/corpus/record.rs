use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ClauseChunk, ClauseId, SpecId, SpecVersion, VersionNumber};
use crate::error::{Error, Result};

/// On-disk form of a [`ClauseChunk`]. Field order is fixed so golden files stay byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_uid: String,
    pub spec_id: SpecId,
    pub clause_id: ClauseId,
    pub version: VersionNumber,
    pub date: NaiveDate,
    pub heading: String,
    pub body: Vec<String>,
}

impl From<ClauseChunk> for ChunkRecord {
    fn from(c: ClauseChunk) -> Self {
        ChunkRecord {
            chunk_uid: c.chunk_uid,
            spec_id: c.spec_id,
            clause_id: c.clause_id,
            version: c.version.number,
            date: c.version.date,
            heading: c.heading,
            body: c.body,
        }
    }
}

impl TryFrom<ChunkRecord> for ClauseChunk {
    type Error = Error;

    fn try_from(r: ChunkRecord) -> Result<Self> {
        if r.body.iter().any(|l| l.contains(['\n', '\r'])) {
            return Err(Error::Parse(format!("{}: body line contains a line break", r.chunk_uid)));
        }
        Ok(ClauseChunk {
            chunk_uid: r.chunk_uid,
            spec_id: r.spec_id,
            clause_id: r.clause_id,
            version: SpecVersion::new(r.version, r.date),
            heading: r.heading,
            body: r.body,
        })
    }
}

pub fn write_chunks_jsonl(path: &Path, chunks: &[ClauseChunk]) -> Result<()> {
    write_jsonl(path, chunks)
}

pub fn read_chunks_jsonl(path: &Path) -> Result<Vec<ClauseChunk>> {
    read_jsonl(path)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::ParseFile {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?;
        items.push(item);
    }
    Ok(items)
}
