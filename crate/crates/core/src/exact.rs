//! Exact first-arrival analysis.
//!
//! * [`marginal_distribution`] evaluates the law of a single hitting time
//!   by its two-step recursion.
//! * [`solve_v`] solves the renewal system
//!   `1 = v_i + Σ_{j≠i} o2(R_j, R_i) N^{-k} v_j` in exact rationals and
//!   normalizes `p_i = v_i / Σ v_j`.
//! * [`absorbing_oracle`] is a window-level dynamic program that shares no
//!   code with the renewal path and is used to cross-check it.
//! * [`ranking_graph`] recovers the digraph from exact pairwise values.

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use num_traits::{Num, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digraph::{Digraph, DigraphError, VertexSet};
use crate::pattern::{first_tie, overlap, Pattern, PatternError};
use crate::rational::{int, inv_pow, ratio, to_f64, Ratio};

/// Largest renewal system solved in exact rationals.
pub const EXACT_MAX_PATTERNS: usize = 20;
/// Largest window space the oracle will allocate.
pub const ORACLE_MAX_WINDOWS: u64 = 1 << 26;

/// A failed precondition of the renewal system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hypothesis {
    /// Patterns `i` and `j` (1-based) can match the same window.
    NoTie(usize, usize),
    /// Pattern `i` (1-based) can follow itself.
    SelfOverlap(usize),
    TooFewPatterns(usize),
    TooFewRows(usize),
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::NoTie(i, j) => write!(f, "patterns {i} and {j} can tie (o1 = 1)"),
            Hypothesis::SelfOverlap(i) => write!(f, "pattern {i} has o2(R, R) = 1"),
            Hypothesis::TooFewPatterns(l) => write!(f, "need at least 2 patterns, got {l}"),
            Hypothesis::TooFewRows(k) => write!(f, "need k >= 2 rows, got {k}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(Hypothesis),
    #[error("pattern {index} uses alphabet M = {alphabet} > N = {symbols}")]
    AlphabetTooLarge { index: usize, alphabet: usize, symbols: usize },
    #[error("patterns have different row counts ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("alphabet size N must be at least 2, got {0}")]
    BadSymbols(usize),
    #[error("{0} patterns exceed the exact-solver limit of {EXACT_MAX_PATTERNS}")]
    TooManyPatterns(usize),
    #[error("need at least one pattern")]
    NoPatterns,
    #[error("double-precision solve left residual {0:e} > 1e-12")]
    ResidualTooLarge(f64),
    #[error("renewal system is singular")]
    Singular,
    #[error("oracle state space N^(2k) = {windows} exceeds 2^26")]
    StateSpaceTooLarge { windows: u128 },
    #[error("sets {0} and {1} overlap")]
    Overlap(VertexSet, VertexSet),
    #[error("group sets must be nonempty")]
    EmptySet,
    #[error("set {set} refers to patterns beyond {count}")]
    IndexOutOfRange { set: VertexSet, count: usize },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Digraph(#[from] DigraphError),
}

type Result<T> = std::result::Result<T, ExactError>;

/// `w(t) = P(T = t)` for `t = 0..=t_max`, for any pattern in `P_{N,k}`
/// that cannot follow itself.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingDistribution<T = Ratio> {
    pub symbols: usize,
    pub rows: usize,
    pub w: Vec<T>,
    /// `(1 − N^{-(k+1)})^{⌊t_max/2⌋}`, an upper bound on `P(T > t_max)`.
    pub tail_bound: f64,
}

impl<T: Num + Clone> HittingDistribution<T> {
    pub fn t_max(&self) -> usize {
        self.w.len() - 1
    }

    /// `P(T > t)` for `t ≤ t_max`.
    pub fn tail(&self, t: usize) -> T {
        self.w[..=t].iter().fold(T::one(), |acc, x| acc - x.clone())
    }

    /// `P(T > t)` for every `t ≤ t_max`.
    pub fn tails(&self) -> Vec<T> {
        let mut acc = T::one();
        self.w
            .iter()
            .map(|x| {
                acc = acc.clone() - x.clone();
                acc.clone()
            })
            .collect()
    }
}

/// `(1 − q)^{⌊t/2⌋}` with `q = N^{-(k+1)}`.
pub fn geometric_tail_bound(symbols: usize, rows: usize, t: u64) -> f64 {
    let q = (symbols as f64).powi(-(rows as i32 + 1));
    ((t / 2) as f64 * (-q).ln_1p()).exp()
}

fn recursion<T: Num + Clone>(q: T, t_max: usize) -> Vec<T> {
    let mut w: Vec<T> = Vec::with_capacity(t_max + 1);
    // prefix = Σ_{s ≤ t-2} w(s)
    let mut prefix = T::zero();
    for t in 0..=t_max {
        if t >= 2 {
            prefix = prefix + w[t - 2].clone();
        }
        w.push(q.clone() * (T::one() - prefix.clone()));
    }
    w
}

pub fn marginal_distribution(symbols: usize, rows: usize, t_max: usize) -> HittingDistribution<Ratio> {
    HittingDistribution {
        symbols,
        rows,
        w: recursion(inv_pow(symbols as u64, rows as u32 + 1), t_max),
        tail_bound: geometric_tail_bound(symbols, rows, t_max as u64),
    }
}

/// [`marginal_distribution`] in double precision.
pub fn marginal_distribution_f64(symbols: usize, rows: usize, t_max: usize) -> HittingDistribution<f64> {
    HittingDistribution {
        symbols,
        rows,
        w: recursion((symbols as f64).powi(-(rows as i32 + 1)), t_max),
        tail_bound: geometric_tail_bound(symbols, rows, t_max as u64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VSolution {
    pub v: Vec<Ratio>,
    pub p: Vec<Ratio>,
    /// `[lower_i, upper_i]` bracketing each `v_i`.
    pub bounds: Vec<(Ratio, Ratio)>,
}

/// `o2[j][i] = o2(R_j, R_i)`, after checking every renewal precondition.
fn renewal_overlaps(patterns: &[Pattern], symbols: usize) -> Result<Vec<Vec<bool>>> {
    let l = patterns.len();
    if symbols < 2 {
        return Err(ExactError::BadSymbols(symbols));
    }
    if l < 2 {
        return Err(ExactError::HypothesisViolated(Hypothesis::TooFewPatterns(l)));
    }
    let k = patterns[0].rows();
    for (index, p) in patterns.iter().enumerate() {
        if p.rows() != k {
            return Err(ExactError::ShapeMismatch(k, p.rows()));
        }
        if p.alphabet() > symbols {
            return Err(ExactError::AlphabetTooLarge { index: index + 1, alphabet: p.alphabet(), symbols });
        }
    }
    if k < 2 {
        return Err(ExactError::HypothesisViolated(Hypothesis::TooFewRows(k)));
    }
    if let Some((i, j)) = first_tie(patterns)? {
        return Err(ExactError::HypothesisViolated(Hypothesis::NoTie(i + 1, j + 1)));
    }
    let mut o2 = vec![vec![false; l]; l];
    for j in 0..l {
        for i in 0..l {
            o2[j][i] = overlap(&patterns[j], &patterns[i])?.o2;
        }
        if o2[j][j] {
            return Err(ExactError::HypothesisViolated(Hypothesis::SelfOverlap(j + 1)));
        }
    }
    Ok(o2)
}

fn bracket(o2: &[Vec<bool>], symbols: usize, rows: usize) -> Vec<(Ratio, Ratio)> {
    let l = o2.len();
    let step = inv_pow(symbols as u64, rows as u32);
    let inner = Ratio::one() - int(l as u64 - 1) * &step;
    (0..l)
        .map(|i| {
            let s = int((0..l).filter(|&j| j != i && o2[j][i]).count() as u64);
            let lower = Ratio::one() - &step * &s;
            let upper = Ratio::one() - &step * &inner * &s;
            (lower, upper)
        })
        .collect()
}

/// The bracket `[1 − N^{-k} S_i, 1 − N^{-k}(1 − (ℓ−1)N^{-k}) S_i]` with
/// `S_i = Σ_{j≠i} o2(R_j, R_i)`.
pub fn v_bounds(patterns: &[Pattern], symbols: usize) -> Result<Vec<(Ratio, Ratio)>> {
    let o2 = renewal_overlaps(patterns, symbols)?;
    Ok(bracket(&o2, symbols, patterns[0].rows()))
}

/// Gauss–Jordan elimination over the rationals.
fn solve_exact(mut a: Vec<Vec<Ratio>>, mut b: Vec<Ratio>) -> Result<Vec<Ratio>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(ExactError::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        b[col] *= &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    Ok(b)
}

pub fn solve_v(patterns: &[Pattern], symbols: usize) -> Result<VSolution> {
    if patterns.len() > EXACT_MAX_PATTERNS {
        return Err(ExactError::TooManyPatterns(patterns.len()));
    }
    let o2 = renewal_overlaps(patterns, symbols)?;
    let l = patterns.len();
    let k = patterns[0].rows();
    let step = inv_pow(symbols as u64, k as u32);
    let a: Vec<Vec<Ratio>> = (0..l)
        .map(|i| {
            (0..l)
                .map(|j| {
                    if i == j {
                        Ratio::one()
                    } else if o2[j][i] {
                        step.clone()
                    } else {
                        Ratio::zero()
                    }
                })
                .collect()
        })
        .collect();
    let v = solve_exact(a, vec![Ratio::one(); l])?;
    let total: Ratio = v.iter().sum();
    let p: Vec<Ratio> = v.iter().map(|x| x / &total).collect();
    let bounds = bracket(&o2, symbols, k);
    for (i, (x, (lo, hi))) in v.iter().zip(&bounds).enumerate() {
        assert!(lo <= x && x <= hi, "v_{} = {x} outside [{lo}, {hi}]", i + 1);
        assert!(x.is_positive() && x <= &Ratio::one());
    }
    Ok(VSolution { v, p, bounds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VApprox {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    /// Max-norm residual of the solved system.
    pub residual: f64,
}

/// Double-precision renewal solve for families too large for [`solve_v`].
pub fn solve_v_approx(patterns: &[Pattern], symbols: usize) -> Result<VApprox> {
    let o2 = renewal_overlaps(patterns, symbols)?;
    let l = patterns.len();
    let step = (symbols as f64).powi(-(patterns[0].rows() as i32));
    let matrix: Vec<Vec<f64>> = (0..l)
        .map(|i| (0..l).map(|j| if i == j { 1.0 } else if o2[j][i] { step } else { 0.0 }).collect())
        .collect();
    let mut a = matrix.clone();
    let mut b = vec![1.0; l];
    for col in 0..l {
        let pivot = (col..l)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("nonempty range");
        if a[pivot][col] == 0.0 {
            return Err(ExactError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..l {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..l {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut v = vec![0.0; l];
    for r in (0..l).rev() {
        let s: f64 = (r + 1..l).map(|c| a[r][c] * v[c]).sum();
        v[r] = (b[r] - s) / a[r][r];
    }
    let residual = matrix
        .iter()
        .map(|row| (row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    if residual > 1e-12 {
        return Err(ExactError::ResidualTooLarge(residual));
    }
    let total: f64 = v.iter().sum();
    let p = v.iter().map(|x| x / total).collect();
    Ok(VApprox { v, p, residual })
}

fn check_groups(a: VertexSet, b: VertexSet, count: usize) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(ExactError::EmptySet);
    }
    if !a.is_disjoint(b) {
        return Err(ExactError::Overlap(a, b));
    }
    for set in [a, b] {
        if set.max_vertex().is_some_and(|m| m > count) {
            return Err(ExactError::IndexOutOfRange { set, count });
        }
    }
    Ok(())
}

fn sub_family(patterns: &[Pattern], set: VertexSet) -> Vec<Pattern> {
    set.iter().map(|i| patterns[i - 1].clone()).collect()
}

/// `P(min_{i∈A'} T_i < min_{j∈B'} T_j)`, with pattern ids 1-based.
pub fn group_prob(patterns: &[Pattern], symbols: usize, a: VertexSet, b: VertexSet) -> Result<Ratio> {
    check_groups(a, b, patterns.len())?;
    let union = a.union(b);
    let sol = solve_v(&sub_family(patterns, union), symbols)?;
    Ok(union.iter().zip(&sol.p).filter(|(i, _)| a.contains(*i)).map(|(_, p)| p).sum())
}

/// Memoized [`group_prob`]: one renewal solve per distinct `A' ∪ B'`.
#[derive(Debug)]
pub struct GroupProbCache {
    patterns: Vec<Pattern>,
    symbols: usize,
    memo: RwLock<HashMap<VertexSet, Vec<Ratio>>>,
}

impl GroupProbCache {
    pub fn new(patterns: Vec<Pattern>, symbols: usize) -> Self {
        GroupProbCache { patterns, symbols, memo: RwLock::new(HashMap::new()) }
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// `p` over the family `set`, in increasing id order.
    pub fn probabilities(&self, set: VertexSet) -> Result<Vec<Ratio>> {
        if let Some(p) = self.memo.read().expect("memo lock").get(&set) {
            return Ok(p.clone());
        }
        let p = solve_v(&sub_family(&self.patterns, set), self.symbols)?.p;
        self.memo.write().expect("memo lock").insert(set, p.clone());
        Ok(p)
    }

    pub fn group_prob(&self, a: VertexSet, b: VertexSet) -> Result<Ratio> {
        check_groups(a, b, self.patterns.len())?;
        let union = a.union(b);
        let p = self.probabilities(union)?;
        Ok(union.iter().zip(&p).filter(|(i, _)| a.contains(*i)).map(|(_, p)| p).sum())
    }
}

/// The window-level dynamic program behind [`absorbing_oracle`].
struct WindowDp {
    per_column: usize,
    /// 0 for no match, else 1-based pattern id.
    matched: Vec<u8>,
    mass: Vec<f64>,
    col_mass: Vec<f64>,
}

impl WindowDp {
    fn new(patterns: &[Pattern], symbols: usize) -> Result<Self> {
        let first = patterns.first().ok_or(ExactError::NoPatterns)?;
        let k = first.rows();
        for (index, p) in patterns.iter().enumerate() {
            if p.rows() != k {
                return Err(ExactError::ShapeMismatch(k, p.rows()));
            }
            if p.alphabet() > symbols {
                return Err(ExactError::AlphabetTooLarge { index: index + 1, alphabet: p.alphabet(), symbols });
            }
        }
        if let Some((i, j)) = first_tie(patterns)? {
            return Err(ExactError::HypothesisViolated(Hypothesis::NoTie(i + 1, j + 1)));
        }
        let windows = (symbols as u128).checked_pow(2 * k as u32).unwrap_or(u128::MAX);
        if windows > ORACLE_MAX_WINDOWS as u128 {
            return Err(ExactError::StateSpaceTooLarge { windows });
        }
        let per_column = symbols.pow(k as u32);
        let decode = |mut idx: usize| -> Vec<u8> {
            let mut col = vec![0u8; k];
            for r in (0..k).rev() {
                col[r] = (idx % symbols) as u8 + 1;
                idx /= symbols;
            }
            col
        };
        let columns: Vec<Vec<u8>> = (0..per_column).map(decode).collect();
        let matched: Vec<u8> = (0..per_column * per_column)
            .into_par_iter()
            .map(|w| {
                let (u, v) = (&columns[w / per_column], &columns[w % per_column]);
                patterns
                    .iter()
                    .position(|p| p.matches_columns(u, v))
                    .map_or(0, |i| i as u8 + 1)
            })
            .collect();
        let total = (per_column * per_column) as f64;
        Ok(WindowDp {
            per_column,
            matched,
            mass: vec![1.0 / total; per_column * per_column],
            col_mass: vec![0.0; per_column],
        })
    }

    /// Absorbs matching windows into `absorbed`, then pushes the rest one
    /// step forward. Returns the surviving mass.
    fn step(&mut self, absorbed: &mut [f64]) -> f64 {
        absorbed.iter_mut().for_each(|x| *x = 0.0);
        for (m, &id) in self.mass.iter_mut().zip(&self.matched) {
            if id != 0 {
                absorbed[id as usize - 1] += *m;
                *m = 0.0;
            }
        }
        let nk = self.per_column;
        self.col_mass.iter_mut().for_each(|x| *x = 0.0);
        for row in self.mass.chunks_exact(nk) {
            for (c, &m) in self.col_mass.iter_mut().zip(row) {
                *c += m;
            }
        }
        let residual: f64 = self.col_mass.iter().sum();
        for (row, &c) in self.mass.chunks_exact_mut(nk).zip(&self.col_mass) {
            row.fill(c / nk as f64);
        }
        residual
    }
}

/// Smallest `t` with `(1 − N^{-(k+1)})^{⌊t/2⌋} < eps`.
fn step_cap(symbols: usize, rows: usize, eps: f64) -> u64 {
    let q = (symbols as f64).powi(-(rows as i32 + 1));
    let half = (eps.ln() / (-q).ln_1p()).floor() as u64 + 1;
    2 * half
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Absorbed mass per pattern.
    pub p: Vec<f64>,
    /// Unabsorbed mass at the stop, an upper bound on each `p_i` error.
    pub residual: f64,
    pub steps: u64,
}

/// Runs the window DP until the surviving mass drops below `eps`.
pub fn absorbing_oracle_run(patterns: &[Pattern], symbols: usize, eps: f64) -> Result<OracleResult> {
    let mut dp = WindowDp::new(patterns, symbols)?;
    let cap = step_cap(symbols, patterns[0].rows(), eps);
    let mut p = vec![0.0; patterns.len()];
    let mut absorbed = vec![0.0; patterns.len()];
    let mut steps = 0;
    let mut residual = 1.0;
    while steps < cap {
        residual = dp.step(&mut absorbed);
        steps += 1;
        p.iter_mut().zip(&absorbed).for_each(|(x, a)| *x += a);
        if residual < eps {
            break;
        }
    }
    Ok(OracleResult { p, residual, steps })
}

pub fn absorbing_oracle(patterns: &[Pattern], symbols: usize, eps: f64) -> Result<CompetitionReport> {
    let out = absorbing_oracle_run(patterns, symbols, eps)?;
    Ok(CompetitionReport {
        method: Method::AbsorbingOracle,
        entries: out
            .p
            .iter()
            .enumerate()
            .map(|(i, &p)| ReportEntry { id: i + 1, p, ..ReportEntry::default() })
            .collect(),
        uncertainty: out.residual,
        config: serde_json::json!({ "N": symbols, "eps": eps, "steps": out.steps }),
    })
}

/// Per-step absorbed mass, `out[t][i] = P(T_min = t, winner i)`.
pub fn absorbing_trace(patterns: &[Pattern], symbols: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut dp = WindowDp::new(patterns, symbols)?;
    let mut row = vec![0.0; patterns.len()];
    Ok((0..steps)
        .map(|_| {
            dp.step(&mut row);
            row.clone()
        })
        .collect())
}

/// Arc `(i, j)` iff `P(T_j < T_i) > 1/2` exactly.
pub fn ranking_graph(patterns: &[Pattern], symbols: usize) -> Result<Digraph> {
    let n = patterns.len();
    let half = ratio(1, 2);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let arcs: Vec<Option<(usize, usize)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let sol = solve_v(&[patterns[i].clone(), patterns[j].clone()], symbols)?;
            Ok(if sol.p[1] > half {
                Some((i + 1, j + 1))
            } else if sol.p[0] > half {
                Some((j + 1, i + 1))
            } else {
                None
            })
        })
        .collect::<Result<_>>()?;
    Ok(Digraph::new(n, arcs.into_iter().flatten())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RenewalSystem,
    AbsorbingOracle,
    MonteCarlo,
}

/// One pattern's line in a [`CompetitionReport`]. Ids are 1-based.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: usize,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wins: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionReport {
    pub method: Method,
    pub entries: Vec<ReportEntry>,
    /// 0 for exact values, the truncation residual for the oracle, the
    /// largest CI half-width for Monte Carlo.
    pub uncertainty: f64,
    pub config: serde_json::Value,
}

impl CompetitionReport {
    pub fn from_solution(sol: &VSolution, config: serde_json::Value) -> Self {
        CompetitionReport {
            method: Method::RenewalSystem,
            entries: sol
                .p
                .iter()
                .zip(&sol.v)
                .enumerate()
                .map(|(i, (p, v))| ReportEntry {
                    id: i + 1,
                    p: to_f64(p),
                    p_exact: Some(p.to_string()),
                    v: Some(to_f64(v)),
                    v_exact: Some(v.to_string()),
                    ..ReportEntry::default()
                })
                .collect(),
            uncertainty: 0.0,
            config,
        }
    }

    pub fn p(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p).collect()
    }
}
