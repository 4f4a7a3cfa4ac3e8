use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{decode_version, SpecId, SpecVersion, VersionNumber};
use crate::error::{Error, Result};
use crate::par;

/// One specification version as ordered text lines.
///
/// Trailing whitespace is stripped from every line on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub spec_id: SpecId,
    pub version: SpecVersion,
    pub lines: Vec<String>,
    pub source_path: String,
}

impl RawDocument {
    pub fn from_text(spec_id: SpecId, version: SpecVersion, text: &str, source_path: impl Into<String>) -> Self {
        let lines = text.lines().map(|l| l.trim_end().to_string()).collect();
        RawDocument { spec_id, version, lines, source_path: source_path.into() }
    }
}

/// Row of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub spec_id: SpecId,
    pub version: VersionNumber,
    pub date: NaiveDate,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATES_FILE: &str = "dates.csv";

fn file_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d{5})-([0-9a-z]{3})\.txt$").unwrap())
}

/// Decodes `38214-h40.txt` into its spec id and version number.
pub fn parse_corpus_file_name(name: &str) -> Option<(SpecId, VersionNumber)> {
    let caps = file_name_re().captures(name)?;
    let spec = SpecId::parse(&caps[1]).ok()?;
    let version = decode_version(&caps[2]).ok()?;
    Some((spec, version))
}

/// Reads a corpus directory, or a manifest file directly.
///
/// In a directory, every `*.txt` file is ingested. Metadata comes from the
/// manifest row naming the file if there is one, otherwise from the file name.
/// Dates come from the manifest, then from `dates.csv` (`file,date`), then from
/// the file modification time. Files with no usable metadata are skipped.
pub fn ingest_corpus(root: &Path) -> Result<Vec<RawDocument>> {
    if root.is_file() {
        return ingest_manifest(root);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            files.push(path);
        }
    }
    files.sort();

    let manifest_path = root.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() { read_manifest(&manifest_path)? } else { Vec::new() };
    let dates_path = root.join(DATES_FILE);
    let dates = if dates_path.is_file() { read_dates(&dates_path)? } else { HashMap::new() };

    let by_path: HashMap<PathBuf, &ManifestRow> =
        manifest.iter().map(|row| (normalize(&root.join(&row.path)), row)).collect();

    let mut jobs: Vec<(PathBuf, SpecId, SpecVersion)> = Vec::new();
    for row in &manifest {
        jobs.push((root.join(&row.path), row.spec_id.clone(), SpecVersion::new(row.version, row.date)));
    }
    for path in files {
        if by_path.contains_key(&normalize(&path)) {
            continue;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some((spec, number)) = parse_corpus_file_name(name) else {
            log::warn!("skipping {}: file name is not <series><number>-<tag>.txt and no manifest row names it", path.display());
            continue;
        };
        let date = match dates.get(name) {
            Some(d) => *d,
            None => {
                let d = modified_date(&path)?;
                log::warn!("{}: no manifest or dates.csv entry, using modification date {d}", path.display());
                d
            }
        };
        jobs.push((path, spec, SpecVersion::new(number, date)));
    }

    let mut docs = par::try_map(&jobs, |(path, spec, version)| read_document(path, spec.clone(), *version))?;
    docs.sort_by(|a, b| (&a.spec_id, a.version, &a.source_path).cmp(&(&b.spec_id, b.version, &b.source_path)));
    Ok(docs)
}

/// Reads only the documents listed in a manifest; paths resolve against the manifest's directory.
pub fn ingest_manifest(manifest_path: &Path) -> Result<Vec<RawDocument>> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let rows = read_manifest(manifest_path)?;
    let mut docs = par::try_map(&rows, |row| {
        read_document(&base.join(&row.path), row.spec_id.clone(), SpecVersion::new(row.version, row.date))
    })?;
    docs.sort_by(|a, b| (&a.spec_id, a.version, &a.source_path).cmp(&(&b.spec_id, b.version, &b.source_path)));
    Ok(docs)
}

fn read_document(path: &Path, spec_id: SpecId, version: SpecVersion) -> Result<RawDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(RawDocument::from_text(spec_id, version, &text, path.display().to_string()))
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    super::record::read_jsonl(path)
}

fn read_dates(path: &Path) -> Result<HashMap<String, NaiveDate>> {
    #[derive(Deserialize)]
    struct Row {
        file: String,
        date: NaiveDate,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::ParseFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = HashMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::ParseFile { path: path.to_path_buf(), message: e.to_string() })?;
        out.insert(row.file, row.date);
    }
    Ok(out)
}

fn modified_date(path: &Path) -> Result<NaiveDate> {
    let modified = fs::metadata(path).and_then(|m| m.modified()).map_err(|e| Error::io(path, e))?;
    Ok(DateTime::<Utc>::from(modified).date_naive())
}

fn normalize(path: &Path) -> PathBuf {
    path.components().collect()
}
