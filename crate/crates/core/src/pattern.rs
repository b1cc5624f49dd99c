//! `k × 2` patterns with a single hump, the overlap calculus, and the
//! family of patterns generated by a digraph.
//!
//! A pattern is stored as its full first column plus the one nonzero entry
//! of the second column. Row numbers in the public API are 1-based.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::digraph::Digraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern has no rows")]
    NoRows,
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),
    #[error("alphabet size {0} exceeds 255")]
    AlphabetTooLarge(usize),
    #[error("row {row}: first-column entry must be in [M], got {value}")]
    FirstColumn { row: usize, value: usize },
    #[error("second column must have exactly one nonzero entry, found {0}")]
    HumpCount(usize),
    #[error("row {row}: hump value {value} is outside [M]")]
    HumpValue { row: usize, value: usize },
    #[error("declared k = {declared} but {found} rows given")]
    RowCount { declared: usize, found: usize },
    #[error("declared hump row {declared} disagrees with recomputed row {found}")]
    HumpMismatch { declared: usize, found: usize },
    #[error("row {0} is outside the matrix")]
    RowOutOfRange(usize),
    #[error("patterns have different row counts ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("digraph must have at least 2 vertices to generate patterns, got {0}")]
    TooSmall(usize),
}

/// Index of the row carrying the hump, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HumpIndex(pub usize);

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    alphabet: u8,
    column: Vec<u8>,
    hump_row: usize,
    hump_value: u8,
}

impl Pattern {
    /// Builds a pattern over `[alphabet] ∪ {0}` from its `k × 2` cells.
    pub fn new(alphabet: usize, cells: &[[usize; 2]]) -> Result<Self, PatternError> {
        if cells.is_empty() {
            return Err(PatternError::NoRows);
        }
        if alphabet < 2 {
            return Err(PatternError::AlphabetTooSmall(alphabet));
        }
        if alphabet > u8::MAX as usize {
            return Err(PatternError::AlphabetTooLarge(alphabet));
        }
        let mut column = Vec::with_capacity(cells.len());
        let mut humps = Vec::new();
        for (r, &[first, second]) in cells.iter().enumerate() {
            if !(1..=alphabet).contains(&first) {
                return Err(PatternError::FirstColumn { row: r + 1, value: first });
            }
            column.push(first as u8);
            if second != 0 {
                humps.push((r, second));
            }
        }
        let &[(hump_row, hump_value)] = humps.as_slice() else {
            return Err(PatternError::HumpCount(humps.len()));
        };
        if hump_value > alphabet {
            return Err(PatternError::HumpValue { row: hump_row + 1, value: hump_value });
        }
        Ok(Pattern {
            alphabet: alphabet as u8,
            column,
            hump_row,
            hump_value: hump_value as u8,
        })
    }

    pub fn rows(&self) -> usize {
        self.column.len()
    }

    /// `M`, the declared alphabet size.
    pub fn alphabet(&self) -> usize {
        self.alphabet as usize
    }

    pub fn hump_index(&self) -> HumpIndex {
        HumpIndex(self.hump_row + 1)
    }

    pub fn hump_value(&self) -> u8 {
        self.hump_value
    }

    pub fn first_column(&self) -> &[u8] {
        &self.column
    }

    /// The full `k × 2` matrix, zeros included.
    pub fn cells(&self) -> Vec<[usize; 2]> {
        self.column
            .iter()
            .enumerate()
            .map(|(r, &c)| {
                let second = if r == self.hump_row { self.hump_value as usize } else { 0 };
                [c as usize, second]
            })
            .collect()
    }

    /// `Π_{h(R)}(u, v) = R`, without shape checks. `u` and `v` are the two
    /// columns of a window.
    #[inline]
    pub fn matches_columns(&self, u: &[u8], v: &[u8]) -> bool {
        v[self.hump_row] == self.hump_value && u == self.column.as_slice()
    }
}

impl std::fmt::Debug for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Pattern(M={}, {:?})", self.alphabet, self.cells())
    }
}

#[derive(Serialize, Deserialize)]
struct RawPattern {
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    cells: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hump: Option<usize>,
}

impl TryFrom<RawPattern> for Pattern {
    type Error = PatternError;

    fn try_from(raw: RawPattern) -> Result<Self, Self::Error> {
        if raw.k != raw.cells.len() {
            return Err(PatternError::RowCount { declared: raw.k, found: raw.cells.len() });
        }
        let p = Pattern::new(raw.m, &raw.cells)?;
        if let Some(declared) = raw.hump {
            if declared != p.hump_index().0 {
                return Err(PatternError::HumpMismatch { declared, found: p.hump_index().0 });
            }
        }
        Ok(p)
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawPattern { k: self.rows(), m: self.alphabet(), cells: self.cells(), hump: None }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawPattern::deserialize(deserializer)?;
        Pattern::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// A list of patterns on disk, optionally with the digraph that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digraph: Option<Digraph>,
    pub patterns: Vec<Pattern>,
}

/// `Π_h`: keep column 1, zero column 2 except at row `h` (1-based).
pub fn project(matrix: &[[usize; 2]], h: usize) -> Result<Vec<[usize; 2]>, PatternError> {
    if h == 0 || h > matrix.len() {
        return Err(PatternError::RowOutOfRange(h));
    }
    Ok(matrix
        .iter()
        .enumerate()
        .map(|(r, &[a, b])| [a, if r + 1 == h { b } else { 0 }])
        .collect())
}

/// `O(R, S) = (o1, o2)`: `o1` says both can match the same window, `o2`
/// says a match of `S` can follow a match of `R` one step later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Overlap {
    pub o1: bool,
    pub o2: bool,
}

impl Overlap {
    pub fn as_pair(self) -> (u8, u8) {
        (self.o1 as u8, self.o2 as u8)
    }
}

pub fn overlap(r: &Pattern, s: &Pattern) -> Result<Overlap, PatternError> {
    if r.rows() != s.rows() {
        return Err(PatternError::ShapeMismatch(r.rows(), s.rows()));
    }
    let o1 = r.column == s.column && (r.hump_row != s.hump_row || r.hump_value == s.hump_value);
    let o2 = r.hump_value == s.column[r.hump_row];
    Ok(Overlap { o1, o2 })
}

/// The `n` patterns in `P_{n+1,n+1}` generated by `d`: pattern `ℓ` has
/// `ℓ` on top, its hump `ℓ` at row `ℓ + 1`, and row `j + 1` of column 1
/// equal to `j` when `(ℓ, j)` is an arc and `n + 1` otherwise.
pub fn generate_patterns(d: &Digraph) -> Result<Vec<Pattern>, PatternError> {
    let n = d.n();
    if n < 2 {
        return Err(PatternError::TooSmall(n));
    }
    (1..=n)
        .map(|l| {
            let mut cells = vec![[0usize; 2]; n + 1];
            cells[0][0] = l;
            for j in 1..=n {
                cells[j][0] = if d.has_arc(l, j) { j } else { n + 1 };
            }
            cells[l][1] = l;
            Pattern::new(n + 1, &cells)
        })
        .collect()
}

/// First ordered pair `(i, j)` (0-based, `i < j`) whose hitting times can tie.
pub fn first_tie(patterns: &[Pattern]) -> Result<Option<(usize, usize)>, PatternError> {
    for (i, r) in patterns.iter().enumerate() {
        for (j, s) in patterns.iter().enumerate().skip(i + 1) {
            if overlap(r, s)?.o1 || overlap(s, r)?.o1 {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

pub fn is_no_tie(patterns: &[Pattern]) -> Result<bool, PatternError> {
    Ok(first_tie(patterns)?.is_none())
}
