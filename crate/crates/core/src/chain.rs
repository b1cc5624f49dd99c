//! Streaming simulation of the two-column chain `X_m = [U_m, U_{m+1}]`.
//!
//! Columns `U_m ∈ [N]^k` are drawn i.i.d. uniform. A [`ChainStream`] keeps
//! only the current window, so memory stays `O(k)` however long it runs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{first_tie, Pattern, PatternError};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("alphabet size N must be in 2..=255, got {0}")]
    BadSymbols(usize),
    #[error("row count k must be at least 1")]
    NoRows,
    #[error("pattern {index} has {found} rows, chain has {expected}")]
    ShapeMismatch { index: usize, expected: usize, found: usize },
    #[error("pattern {index} uses alphabet M = {alphabet} > N = {symbols}")]
    AlphabetTooLarge { index: usize, alphabet: usize, symbols: usize },
    #[error("patterns {0} and {1} can match the same window (o1 = 1)")]
    NoTieViolation(usize, usize),
    #[error("no pattern matched within {0} steps")]
    GuardExceeded(u64),
    #[error("injected column source ran out at time {0}")]
    SourceExhausted(u64),
    #[error("injected column {index} is malformed: {reason}")]
    BadColumn { index: usize, reason: String },
    #[error("need at least one pattern")]
    NoPatterns,
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    /// `N`.
    pub symbols: usize,
    /// `k`.
    pub rows: usize,
    pub seed: u64,
}

impl ChainParams {
    pub fn new(symbols: usize, rows: usize, seed: u64) -> Result<Self, ChainError> {
        if !(2..=u8::MAX as usize).contains(&symbols) {
            return Err(ChainError::BadSymbols(symbols));
        }
        if rows == 0 {
            return Err(ChainError::NoRows);
        }
        Ok(ChainParams { symbols, rows, seed })
    }
}

pub trait ColumnSource {
    /// Writes the next column into `column`. `time` is the index of the
    /// column being produced.
    fn fill(&mut self, time: u64, column: &mut [u8]) -> Result<(), ChainError>;
}

/// i.i.d. uniform columns from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct RandomColumns {
    rng: ChaCha8Rng,
    symbols: u8,
}

impl RandomColumns {
    pub fn new(symbols: u8, seed: u64) -> Self {
        RandomColumns { rng: ChaCha8Rng::seed_from_u64(seed), symbols }
    }
}

impl ColumnSource for RandomColumns {
    #[inline]
    fn fill(&mut self, _time: u64, column: &mut [u8]) -> Result<(), ChainError> {
        for c in column.iter_mut() {
            *c = self.rng.random_range(1..=self.symbols);
        }
        Ok(())
    }
}

/// Replays an explicit list of columns.
#[derive(Debug, Clone)]
pub struct ReplayColumns {
    columns: Vec<Vec<u8>>,
}

impl ReplayColumns {
    pub fn new(symbols: usize, rows: usize, columns: Vec<Vec<usize>>) -> Result<Self, ChainError> {
        let columns = columns
            .into_iter()
            .enumerate()
            .map(|(index, col)| {
                if col.len() != rows {
                    return Err(ChainError::BadColumn {
                        index,
                        reason: format!("expected {rows} entries, got {}", col.len()),
                    });
                }
                col.into_iter()
                    .map(|x| {
                        if (1..=symbols).contains(&x) {
                            Ok(x as u8)
                        } else {
                            Err(ChainError::BadColumn { index, reason: format!("entry {x} not in [{symbols}]") })
                        }
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(ReplayColumns { columns })
    }

    /// Column list from a JSON array of arrays, e.g. `[[1,2,2],[1,2,1]]`.
    pub fn from_json(symbols: usize, rows: usize, text: &str) -> Result<Self, ChainError> {
        let cols: Vec<Vec<usize>> = serde_json::from_str(text)?;
        ReplayColumns::new(symbols, rows, cols)
    }
}

impl ColumnSource for ReplayColumns {
    fn fill(&mut self, time: u64, column: &mut [u8]) -> Result<(), ChainError> {
        let col = self
            .columns
            .get(time as usize)
            .ok_or(ChainError::SourceExhausted(time))?;
        column.copy_from_slice(col);
        Ok(())
    }
}

/// The observable state `X_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window<'a> {
    pub u: &'a [u8],
    pub v: &'a [u8],
    pub m: u64,
    pub symbols: usize,
}

pub struct ChainStream<S> {
    symbols: usize,
    source: S,
    current: Vec<u8>,
    next: Vec<u8>,
    time: u64,
}

/// A random chain with parameters `p`.
pub fn new_chain(p: ChainParams) -> ChainStream<RandomColumns> {
    ChainStream::with_source(p.symbols, p.rows, RandomColumns::new(p.symbols as u8, p.seed))
        .expect("random columns never run out")
}

impl ChainStream<ReplayColumns> {
    pub fn replay(symbols: usize, rows: usize, columns: Vec<Vec<usize>>) -> Result<Self, ChainError> {
        ChainParams::new(symbols, rows, 0)?;
        ChainStream::with_source(symbols, rows, ReplayColumns::new(symbols, rows, columns)?)
    }
}

impl<S: ColumnSource> ChainStream<S> {
    pub fn with_source(symbols: usize, rows: usize, mut source: S) -> Result<Self, ChainError> {
        let mut current = vec![0; rows];
        let mut next = vec![0; rows];
        source.fill(0, &mut current)?;
        source.fill(1, &mut next)?;
        Ok(ChainStream { symbols, source, current, next, time: 0 })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn rows(&self) -> usize {
        self.current.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn window(&self) -> Window<'_> {
        Window { u: &self.current, v: &self.next, m: self.time, symbols: self.symbols }
    }

    /// Moves to `X_{m+1}`: the old second column becomes the first.
    #[inline]
    pub fn advance(&mut self) -> Result<(), ChainError> {
        std::mem::swap(&mut self.current, &mut self.next);
        self.source.fill(self.time + 2, &mut self.next)?;
        self.time += 1;
        Ok(())
    }

    /// Index of the (unique, under no-tie) pattern matching the current window.
    #[inline]
    fn matching(&self, patterns: &[Pattern]) -> Option<usize> {
        patterns
            .iter()
            .position(|p| p.matches_columns(&self.current, &self.next))
    }
}

/// `X_m ▷ R`, with shape and alphabet checks.
pub fn matches(w: &Window<'_>, r: &Pattern) -> Result<bool, ChainError> {
    check_pattern(0, r, w.u.len(), w.symbols)?;
    Ok(r.matches_columns(w.u, w.v))
}

fn check_pattern(index: usize, r: &Pattern, rows: usize, symbols: usize) -> Result<(), ChainError> {
    if r.rows() != rows {
        return Err(ChainError::ShapeMismatch { index, expected: rows, found: r.rows() });
    }
    if r.alphabet() > symbols {
        return Err(ChainError::AlphabetTooLarge { index, alphabet: r.alphabet(), symbols });
    }
    Ok(())
}

/// Shape, alphabet and no-tie preconditions for racing `patterns` on a chain.
pub fn check_competition(patterns: &[Pattern], rows: usize, symbols: usize) -> Result<(), ChainError> {
    if patterns.is_empty() {
        return Err(ChainError::NoPatterns);
    }
    for (i, p) in patterns.iter().enumerate() {
        check_pattern(i, p, rows, symbols)?;
    }
    if let Some((i, j)) = first_tie(patterns)? {
        return Err(ChainError::NoTieViolation(i, j));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// 0-based index into the pattern list.
    pub winner: usize,
    pub time: u64,
}

/// Advances until some pattern matches; `guard` caps the number of windows
/// inspected.
pub fn run_competition_trial<S: ColumnSource>(
    stream: &mut ChainStream<S>,
    patterns: &[Pattern],
    guard: Option<u64>,
) -> Result<TrialOutcome, ChainError> {
    check_competition(patterns, stream.rows(), stream.symbols())?;
    race(stream, patterns, guard)
}

/// [`run_competition_trial`] without re-checking preconditions.
pub(crate) fn race<S: ColumnSource>(
    stream: &mut ChainStream<S>,
    patterns: &[Pattern],
    guard: Option<u64>,
) -> Result<TrialOutcome, ChainError> {
    let mut inspected = 0u64;
    loop {
        if let Some(winner) = stream.matching(patterns) {
            return Ok(TrialOutcome { winner, time: stream.time });
        }
        inspected += 1;
        if guard.is_some_and(|g| inspected >= g) {
            return Err(ChainError::GuardExceeded(inspected));
        }
        stream.advance()?;
    }
}

/// `T_R` for a single pattern.
pub fn hitting_time<S: ColumnSource>(
    stream: &mut ChainStream<S>,
    pattern: &Pattern,
    guard: Option<u64>,
) -> Result<u64, ChainError> {
    run_competition_trial(stream, std::slice::from_ref(pattern), guard).map(|o| o.time)
}

/// Renewal times and match counters over the windows `m < t_max`.
///
/// `Z_0` is the first match of any pattern and `Z_{h+1}` the first match at
/// or after `Z_h + 2`. A match at `Z_h + 1` is a follow-on, counted in
/// `matches` but not in `renewal_matches`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenewalScan {
    pub t_max: u64,
    pub z_times: Vec<u64>,
    /// Pattern index (0-based) hitting at each renewal time.
    pub hitters: Vec<usize>,
    /// `V_{i,t}`.
    pub renewal_matches: Vec<u64>,
    /// `N_{i,t}`.
    pub matches: Vec<u64>,
    /// `follow_on[j][i]`: renewals `Z_s ≤ t − 2` hit by `j` with a match of
    /// `i` at `Z_s + 1`.
    pub follow_on: Vec<Vec<u64>>,
    /// Renewals `Z_s ≤ t − 2` hit by `j`, the denominators for `follow_on[j]`.
    pub renewals_with_successor: Vec<u64>,
}

impl RenewalScan {
    /// `N_i − V_i − Σ_{j≠i} follow_on[j][i]` for each pattern.
    pub fn clustering_defect(&self) -> Vec<i64> {
        (0..self.matches.len())
            .map(|i| {
                let cluster: u64 = (0..self.matches.len())
                    .filter(|&j| j != i)
                    .map(|j| self.follow_on[j][i])
                    .sum();
                self.matches[i] as i64 - self.renewal_matches[i] as i64 - cluster as i64
            })
            .collect()
    }

    pub fn clustering_identity_holds(&self) -> bool {
        self.clustering_defect().iter().all(|&d| d == 0)
    }

    /// Empirical `P(match of i at Z_s + 1 | hitter j at Z_s)`.
    pub fn follow_on_frequency(&self, j: usize, i: usize) -> Option<f64> {
        let trials = self.renewals_with_successor[j];
        (trials > 0).then(|| self.follow_on[j][i] as f64 / trials as f64)
    }
}

/// Scans windows `m = start .. start + t_max − 1`.
pub fn renewal_scan<S: ColumnSource>(
    stream: &mut ChainStream<S>,
    patterns: &[Pattern],
    t_max: u64,
) -> Result<RenewalScan, ChainError> {
    check_competition(patterns, stream.rows(), stream.symbols())?;
    let l = patterns.len();
    let mut scan = RenewalScan {
        t_max,
        z_times: Vec::new(),
        hitters: Vec::new(),
        renewal_matches: vec![0; l],
        matches: vec![0; l],
        follow_on: vec![vec![0; l]; l],
        renewals_with_successor: vec![0; l],
    };
    let mut last: Option<(u64, usize)> = None;
    for step in 0..t_max {
        let m = stream.time();
        // The window right after a renewal is the only place a follow-on can occur.
        let after_renewal = last.filter(|&(z, _)| m == z + 1).map(|(_, j)| j);
        if let Some(j) = after_renewal {
            scan.renewals_with_successor[j] += 1;
        }
        if let Some(i) = stream.matching(patterns) {
            debug_assert!(
                patterns.iter().filter(|p| p.matches_columns(stream.window().u, stream.window().v)).count() == 1
            );
            scan.matches[i] += 1;
            match after_renewal {
                Some(j) => scan.follow_on[j][i] += 1,
                None => {
                    scan.z_times.push(m);
                    scan.hitters.push(i);
                    scan.renewal_matches[i] += 1;
                    last = Some((m, i));
                }
            }
        }
        if step + 1 < t_max {
            stream.advance()?;
        }
    }
    assert!(
        scan.clustering_identity_holds(),
        "clustering identity violated: {:?}",
        scan.clustering_defect()
    );
    Ok(scan)
}

/// Writes `steps` windows as CSV: `m,u1..uk,v1..vk,matched`, with `matched`
/// the 1-based pattern id or `-`.
pub fn write_trace<S: ColumnSource, W: Write>(
    stream: &mut ChainStream<S>,
    patterns: &[Pattern],
    steps: u64,
    out: &mut W,
) -> Result<(), ChainError> {
    let k = stream.rows();
    for p in patterns.iter().enumerate() {
        check_pattern(p.0, p.1, k, stream.symbols())?;
    }
    let header: Vec<String> = std::iter::once("m".to_string())
        .chain((1..=k).map(|r| format!("u{r}")))
        .chain((1..=k).map(|r| format!("v{r}")))
        .chain(std::iter::once("matched".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for step in 0..steps {
        let w = stream.window();
        let matched: Vec<String> = patterns
            .iter()
            .enumerate()
            .filter(|(_, p)| p.matches_columns(w.u, w.v))
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        let cells: Vec<String> = w.u.iter().chain(w.v).map(|c| c.to_string()).collect();
        let tag = if matched.is_empty() { "-".to_string() } else { matched.join(" ") };
        writeln!(out, "{},{},{}", w.m, cells.join(","), tag)?;
        if step + 1 < steps {
            stream.advance()?;
        }
    }
    Ok(())
}
