//! LCS line diff with positional pairing of replaced lines.

use serde::{Deserialize, Serialize};

/// A contiguous replacement: `removed` lines at `old_start` become `added` lines at `new_start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub new_start: usize,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

/// Result of [`diff_lines`].
///
/// Within each hunk the i-th removed line is paired with the i-th added line
/// into `modified`; unpaired leftovers stay in `removed` or `added`. `hunks`
/// keeps positions so the diff can be replayed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<(String, String)>,
    pub hunks: Vec<Hunk>,
}

impl LineDiff {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Replays the hunks over `old`. `old` must be the text the diff was computed from.
    pub fn apply(&self, old: &[String]) -> Vec<String> {
        apply_hunks(&self.hunks, old)
    }
}

pub fn apply_hunks(hunks: &[Hunk], old: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(old.len());
    let mut cursor = 0;
    for h in hunks {
        out.extend_from_slice(&old[cursor..h.old_start]);
        out.extend(h.added.iter().cloned());
        cursor = h.old_start + h.removed.len();
    }
    out.extend_from_slice(&old[cursor.min(old.len())..]);
    out
}

fn same(a: &str, b: &str) -> bool {
    a.trim_end() == b.trim_end()
}

/// Line diff of `old` against `new`.
///
/// Lines are compared after stripping trailing whitespace. Added and removed
/// lines are exactly those outside one longest common subsequence.
pub fn diff_lines(old: &[String], new: &[String]) -> LineDiff {
    let prefix = old.iter().zip(new).take_while(|(a, b)| same(a, b)).count();
    let suffix = old[prefix..]
        .iter()
        .rev()
        .zip(new[prefix..].iter().rev())
        .take_while(|(a, b)| same(a, b))
        .count();
    let a = &old[prefix..old.len() - suffix];
    let b = &new[prefix..new.len() - suffix];

    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if same(&a[i], &b[j]) {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }

    let mut diff = LineDiff::default();
    let mut open: Option<Hunk> = None;
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && same(&a[i], &b[j]) {
            if let Some(h) = open.take() {
                diff.push(h);
            }
            i += 1;
            j += 1;
            continue;
        }
        let h = open.get_or_insert_with(|| Hunk {
            old_start: prefix + i,
            new_start: prefix + j,
            removed: Vec::new(),
            added: Vec::new(),
        });
        if j == m || (i < n && lcs[(i + 1) * width + j] >= lcs[i * width + j + 1]) {
            h.removed.push(a[i].clone());
            i += 1;
        } else {
            h.added.push(b[j].clone());
            j += 1;
        }
    }
    if let Some(h) = open.take() {
        diff.push(h);
    }
    diff
}

impl LineDiff {
    fn push(&mut self, hunk: Hunk) {
        let paired = hunk.removed.len().min(hunk.added.len());
        for (o, n) in hunk.removed.iter().zip(&hunk.added) {
            self.modified.push((o.clone(), n.clone()));
        }
        self.removed.extend(hunk.removed[paired..].iter().cloned());
        self.added.extend(hunk.added[paired..].iter().cloned());
        self.hunks.push(hunk);
    }
}
