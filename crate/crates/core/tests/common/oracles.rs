//! Reference implementations shared by the module tests and the acceptance run.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::Deserialize;
use specrag_core::corpus::{ClauseChunk, ClauseId, SpecId, SpecVersion, VersionNumber};
use specrag_core::crossref::extract_references;
use specrag_core::embedding::Embedder;
use specrag_core::eval::{score_crossref, GoldReferenceSet, GoldRow, Label, Target};

use super::{fixture, mock, planted_dbs};

/// Canonical script by memoized recursion over whole inputs: keep equal heads,
/// otherwise drop from `old` when that does not shorten the LCS.
pub fn oracle(old: &[String], new: &[String]) -> (Vec<String>, Vec<String>) {
    fn len(i: usize, j: usize, a: &[String], b: &[String], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + len(i + 1, j + 1, a, b, memo)
        } else {
            len(i + 1, j, a, b, memo).max(len(i, j + 1, a, b, memo))
        };
        memo.insert((i, j), v);
        v
    }
    let mut memo = HashMap::new();
    let (mut removed, mut added) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < old.len() || j < new.len() {
        if i < old.len() && j < new.len() && old[i] == new[j] {
            i += 1;
            j += 1;
        } else if j == new.len()
            || (i < old.len() && len(i + 1, j, old, new, &mut memo) >= len(i, j + 1, old, new, &mut memo))
        {
            removed.push(old[i].clone());
            i += 1;
        } else {
            added.push(new[j].clone());
            j += 1;
        }
    }
    removed.sort();
    added.sort();
    (removed, added)
}

#[derive(Deserialize)]
struct Labeled {
    spec: String,
    text: String,
    refs: Vec<(String, Option<String>)>,
}

type Pair = (String, Option<String>);

pub fn sentence_chunk(spec: &str, text: &str) -> ClauseChunk {
    ClauseChunk::new(
        SpecId::parse(spec).unwrap(),
        ClauseId::parse("99.9").unwrap(),
        SpecVersion::new(VersionNumber::new(18, 0, 0), NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()),
        "Test clause",
        vec![text.to_string()],
    )
}

fn extracted(c: &ClauseChunk) -> BTreeSet<Pair> {
    extract_references(c)
        .into_iter()
        .map(|r| (r.spec_id.to_string(), r.clause_id.map(|c| c.to_string())))
        .collect()
}

/// Micro precision and recall of extraction over the labeled sentences.
pub fn citation_scores() -> (f64, f64, Vec<String>) {
    let text = std::fs::read_to_string(fixture("citations.jsonl")).unwrap();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut misses = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Labeled = serde_json::from_str(line).unwrap();
        let got = extracted(&sentence_chunk(&row.spec, &row.text));
        let want: BTreeSet<Pair> = row.refs.into_iter().collect();
        tp += got.intersection(&want).count();
        fp += got.difference(&want).count();
        fn_ += want.difference(&got).count();
        if got != want {
            misses.push(format!("{}: got {got:?}, want {want:?}", row.text));
        }
    }
    (tp as f64 / (tp + fp) as f64, tp as f64 / (tp + fn_) as f64, misses)
}

#[derive(Deserialize)]
struct Case {
    name: String,
    gold: Vec<(String, String, String, Label)>,
    retrieved: BTreeMap<String, Vec<(String, String)>>,
    expected: HashMap<String, f64>,
}

pub fn target(s: &str, c: &str) -> Target {
    (SpecId::parse(s).unwrap(), ClauseId::parse(c).unwrap())
}

pub fn gold_of(rows: &[(String, String, String, Label)]) -> GoldReferenceSet {
    GoldReferenceSet::new(
        rows.iter()
            .map(|(src, s, c, l)| GoldRow {
                source_chunk_uid: src.clone(),
                spec_id: SpecId::parse(s).unwrap(),
                clause_id: ClauseId::parse(c).unwrap(),
                label: *l,
            })
            .collect(),
    )
    .unwrap()
}

/// Runs every hand-computed case; returns `(name, field, got, want)` for each mismatch.
pub fn scoring_mismatches() -> Vec<(String, String, f64, f64)> {
    let cases: Vec<Case> =
        serde_json::from_str(&std::fs::read_to_string(fixture("scoring_cases.json")).unwrap()).unwrap();
    assert_eq!(cases.len(), 3);
    let mut bad = Vec::new();
    for case in cases {
        let retrieved = case
            .retrieved
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|(s, c)| target(s, c)).collect()))
            .collect();
        let r = score_crossref(&retrieved, &gold_of(&case.gold)).unwrap();
        let got = [
            ("macro_precision", r.macro_precision),
            ("macro_recall", r.macro_recall),
            ("macro_f1", r.macro_f1),
            ("micro_tp", r.micro_tp as f64),
            ("micro_fp", r.micro_fp as f64),
            ("micro_fn", r.micro_fn as f64),
        ];
        for (field, value) in got {
            let want = case.expected[field];
            if (value - want).abs() > 1e-9 {
                bad.push((case.name.clone(), field.to_string(), value, want));
            }
        }
    }
    bad
}

/// Recall computed without the store or the extractor: brute-force cosine for
/// seeds and a walk over the hand-listed edges.
pub fn oracle_macro_recall(k1: usize, depth: usize) -> f64 {
    let db = &planted_dbs().spec;
    let gold = GoldReferenceSet::read_csv(&fixture("planted/gold.csv")).unwrap();
    let e = mock();
    let vecs: HashMap<&str, Vec<f32>> =
        db.chunks().iter().map(|c| (c.chunk_uid.as_str(), e.embed_one(&c.embedding_text()).unwrap().into_inner())).collect();
    let uid_of: HashMap<(String, String), &str> =
        db.chunks().iter().map(|c| ((c.spec_id.to_string(), c.clause_id.to_string()), c.chunk_uid.as_str())).collect();
    let mut edges: HashMap<String, Vec<(String, String)>> = HashMap::new();
    let mut rdr = csv::Reader::from_path(fixture("planted/edges.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        edges.entry(row[0].to_string()).or_default().push((row[1].to_string(), row[2].to_string()));
    }
    let cos = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
        let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    };

    let mut total = 0.0;
    let sources: Vec<&str> = gold.sources().collect();
    for src in &sources {
        let mut others: Vec<(f64, &str)> =
            vecs.iter().filter(|(u, _)| *u != src).map(|(u, v)| (cos(&vecs[src], v), *u)).collect();
        others.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let mut reached: BTreeSet<&str> = std::iter::once(*src).chain(others.iter().take(k1 - 1).map(|p| p.1)).collect();
        let mut frontier: Vec<&str> = reached.iter().copied().collect();
        for _ in 0..depth {
            let mut next = Vec::new();
            for u in frontier {
                for key in edges.get(u).into_iter().flatten() {
                    if let Some(&t) = uid_of.get(key) {
                        if reached.insert(t) {
                            next.push(t);
                        }
                    }
                }
            }
            frontier = next;
        }
        let helpful = gold.helpful(src).unwrap();
        let hit = reached
            .iter()
            .filter(|u| *u != src)
            .filter(|u| helpful.iter().any(|(s, c)| uid_of[&(s.to_string(), c.to_string())] == **u))
            .count();
        total += hit as f64 / helpful.len() as f64;
    }
    total / sources.len() as f64
}

