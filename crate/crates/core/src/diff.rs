//! Line-level diff between buggy and fixed code, built on a
//! longest-common-subsequence alignment.
//!
//! Tie-breaking is deterministic: among all optimal alignments the one
//! whose matched (buggy, fixed) index pairs are lexicographically
//! smallest is chosen, i.e. the earliest possible lines are matched.
//! Within a gap between matches, buggy-only lines precede fixed-only
//! lines.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Marker {
    Unchanged,
    /// Present only in the buggy version (removed by the fix).
    BuggyOnly,
    /// Present only in the fixed version (added by the fix).
    FixedOnly,
}

/// Aligned view over both texts: one entry per line of either side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiff {
    pub entries: Vec<(Marker, String)>,
}

/// Split into lines such that joining with `\n` reproduces the input
/// exactly. The empty text has zero lines.
pub fn split_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').collect()
    }
}

pub fn line_diff(buggy: &str, fixed: &str) -> LineDiff {
    let a = split_lines(buggy);
    let b = split_lines(fixed);
    let n = a.len();
    let m = b.len();

    // dp[i][j] = LCS length of a[i..] and b[j..]
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }

    let mut entries = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        if i == n {
            entries.push((Marker::FixedOnly, b[j].to_string()));
            j += 1;
        } else if j == m {
            entries.push((Marker::BuggyOnly, a[i].to_string()));
            i += 1;
        } else if a[i] == b[j] && dp[i + 1][j + 1] + 1 == dp[i][j] {
            entries.push((Marker::Unchanged, a[i].to_string()));
            i += 1;
            j += 1;
        } else {
            // Matching a[i] with some later b[j2] keeps the buggy-side
            // match index minimal; only then do we consume fixed lines.
            let row_has_match = (j..m).any(|j2| a[i] == b[j2] && dp[i + 1][j2 + 1] + 1 == dp[i][j]);
            if row_has_match {
                entries.push((Marker::FixedOnly, b[j].to_string()));
                j += 1;
            } else {
                entries.push((Marker::BuggyOnly, a[i].to_string()));
                i += 1;
            }
        }
    }
    LineDiff { entries }
}

impl LineDiff {
    /// Lines of the buggy side, in order.
    pub fn buggy_lines(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(m, _)| matches!(m, Marker::Unchanged | Marker::BuggyOnly))
            .map(|(_, l)| l.as_str())
            .collect()
    }

    pub fn fixed_lines(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(m, _)| matches!(m, Marker::Unchanged | Marker::FixedOnly))
            .map(|(_, l)| l.as_str())
            .collect()
    }

    pub fn reconstruct_buggy(&self) -> String {
        self.buggy_lines().join("\n")
    }

    pub fn reconstruct_fixed(&self) -> String {
        self.fixed_lines().join("\n")
    }

    /// One tag per buggy line: 1 when the line exists only pre-fix.
    pub fn buggy_line_tags(&self) -> Vec<u8> {
        self.entries
            .iter()
            .filter_map(|(m, _)| match m {
                Marker::Unchanged => Some(0),
                Marker::BuggyOnly => Some(1),
                Marker::FixedOnly => None,
            })
            .collect()
    }

    pub fn is_identical(&self) -> bool {
        self.entries.iter().all(|(m, _)| *m == Marker::Unchanged)
    }

    /// Matched (buggy index, fixed index) pairs of the alignment.
    pub fn match_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        for (marker, _) in &self.entries {
            match marker {
                Marker::Unchanged => {
                    pairs.push((i, j));
                    i += 1;
                    j += 1;
                }
                Marker::BuggyOnly => i += 1,
                Marker::FixedOnly => j += 1,
            }
        }
        pairs
    }
}
