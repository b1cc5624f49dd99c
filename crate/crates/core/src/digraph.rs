//! Digraphs, tournaments and `(r1, r2)`-directionality.
//!
//! A digraph here is an oriented graph on `[n]`: no loops and never both
//! `(i, j)` and `(j, i)`. Adjacency is kept as one out-neighbour bitmask per
//! vertex, which caps `n` at 64 and makes the subset checks in this module
//! and in [`crate::game`] one `AND` per vertex.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Pow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_VERTICES: usize = 64;

/// Largest `n` for which [`min_s_exhaustive`] enumerates `2^{C(n,2)}` tournaments.
pub const MAX_EXHAUSTIVE_VERTICES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DigraphError {
    #[error("digraph needs at least one vertex")]
    NoVertices,
    #[error("{0} vertices exceeds the supported maximum of {MAX_VERTICES}")]
    TooManyVertices(usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("2-cycle between {0} and {1}")]
    TwoCycle(usize, usize),
    #[error("vertex {0} is outside [n]")]
    VertexOutOfRange(usize),
    #[error("arc ({0},{1}) listed twice")]
    DuplicateArc(usize, usize),
    #[error("vertex set is empty")]
    EmptySet,
    #[error("pair {{{0},{1}}} has no arc, so this is not a tournament")]
    NotTournament(usize, usize),
    #[error("n = {n} is smaller than r1 + r2 = {needed}")]
    ParamsTooLarge { n: usize, needed: usize },
    #[error("tournament is not ({r1},{r2})-directional")]
    NotDirectional { r1: usize, r2: usize },
    #[error("r1 and r2 must both be at least 1")]
    InvalidParams,
    #[error("exhaustive enumeration is limited to n <= {MAX_EXHAUSTIVE_VERTICES}, got {0}")]
    EnumerationTooLarge(usize),
    #[error("malformed vertex set {0:?}")]
    BadSetSyntax(String),
}

/// A set of 1-based vertices, stored as a bitmask (bit `v - 1` for vertex `v`).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct VertexSet(u64);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub fn from_bits(bits: u64) -> Self {
        VertexSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// `[n]`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            VertexSet(u64::MAX)
        } else {
            VertexSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(v: usize) -> Self {
        debug_assert!((1..=MAX_VERTICES).contains(&v));
        VertexSet(1u64 << (v - 1))
    }

    pub fn from_vertices<I: IntoIterator<Item = usize>>(vertices: I) -> Self {
        vertices
            .into_iter()
            .fold(VertexSet::EMPTY, |s, v| s.union(VertexSet::singleton(v)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, v: usize) -> bool {
        (1..=MAX_VERTICES).contains(&v) && self.0 & (1u64 << (v - 1)) != 0
    }

    pub fn union(self, other: VertexSet) -> VertexSet {
        VertexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VertexSet) -> VertexSet {
        VertexSet(self.0 & other.0)
    }

    pub fn difference(self, other: VertexSet) -> VertexSet {
        VertexSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: VertexSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: VertexSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn max_vertex(self) -> Option<usize> {
        (self.0 != 0).then(|| 64 - self.0.leading_zeros() as usize)
    }

    /// Vertices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let v = bits.trailing_zeros() as usize + 1;
                bits &= bits - 1;
                v
            })
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Nonempty subsets of `self`, in lexicographic order of their sorted
    /// element lists.
    pub fn nonempty_subsets(self) -> Vec<VertexSet> {
        let mut subs = Vec::with_capacity((1usize << self.len()) - 1);
        let mut sub = self.0;
        while sub != 0 {
            subs.push(VertexSet(sub));
            sub = (sub - 1) & self.0;
        }
        subs.sort();
        subs
    }

    /// Subsets of `self` with exactly `size` elements, lexicographically ordered.
    pub fn subsets_of_size(self, size: usize) -> Vec<VertexSet> {
        let elems = self.to_vec();
        let mut out = Vec::new();
        if size > elems.len() {
            return out;
        }
        let m = elems.len();
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(VertexSet::from_vertices(idx.iter().map(|&i| elems[i])));
            let mut pos = size;
            while pos > 0 && idx[pos - 1] == pos - 1 + m - size {
                pos -= 1;
            }
            if pos == 0 {
                return out;
            }
            idx[pos - 1] += 1;
            for q in pos..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
}

impl Ord for VertexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for VertexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses `{1,3}`; braces are optional and whitespace is ignored.
impl FromStr for VertexSet {
    type Err = DigraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DigraphError::BadSetSyntax(s.to_string());
        let trimmed = s.trim();
        let inner = match (trimmed.strip_prefix('{'), trimmed.ends_with('}')) {
            (Some(rest), true) => &rest[..rest.len() - 1],
            (None, false) => trimmed,
            _ => return Err(bad()),
        };
        let mut set = VertexSet::EMPTY;
        if inner.trim().is_empty() {
            return Ok(set);
        }
        for tok in inner.split(',') {
            let v: usize = tok.trim().parse().map_err(|_| bad())?;
            if !(1..=MAX_VERTICES).contains(&v) {
                return Err(DigraphError::VertexOutOfRange(v));
            }
            let s = VertexSet::singleton(v);
            if !set.is_disjoint(s) {
                return Err(bad());
            }
            set = set.union(s);
        }
        Ok(set)
    }
}

impl Serialize for VertexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for VertexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let vs = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&v) = vs.iter().find(|&&v| !(1..=MAX_VERTICES).contains(&v)) {
            return Err(serde::de::Error::custom(DigraphError::VertexOutOfRange(v)));
        }
        Ok(VertexSet::from_vertices(vs))
    }
}

/// Oriented graph on `[n]`. Arc order from construction is kept so that
/// JSON round-trips are byte-identical.
#[derive(Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    arcs: Vec<(usize, usize)>,
    out: Vec<VertexSet>,
}

impl Digraph {
    /// Validates a raw vertex count plus arc list.
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, DigraphError> {
        if n == 0 {
            return Err(DigraphError::NoVertices);
        }
        if n > MAX_VERTICES {
            return Err(DigraphError::TooManyVertices(n));
        }
        let mut out = vec![VertexSet::EMPTY; n];
        let mut list = Vec::new();
        for (i, j) in arcs {
            for v in [i, j] {
                if v == 0 || v > n {
                    return Err(DigraphError::VertexOutOfRange(v));
                }
            }
            if i == j {
                return Err(DigraphError::SelfLoop(i));
            }
            if out[j - 1].contains(i) {
                return Err(DigraphError::TwoCycle(i.min(j), i.max(j)));
            }
            if out[i - 1].contains(j) {
                return Err(DigraphError::DuplicateArc(i, j));
            }
            out[i - 1] = out[i - 1].union(VertexSet::singleton(j));
            list.push((i, j));
        }
        Ok(Digraph { n, arcs: list, out })
    }

    pub fn empty(n: usize) -> Result<Self, DigraphError> {
        Digraph::new(n, [])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        (1..=self.n).contains(&i) && self.out[i - 1].contains(j)
    }

    pub fn out_neighbors(&self, v: usize) -> VertexSet {
        self.out[v - 1]
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    /// Arcs in lexicographic order, independent of insertion order.
    pub fn sorted_arcs(&self) -> Vec<(usize, usize)> {
        let mut arcs = self.arcs.clone();
        arcs.sort_unstable();
        arcs
    }

    /// Same vertex count and arc set, regardless of listing order.
    pub fn same_arcs(&self, other: &Digraph) -> bool {
        self.n == other.n && self.out == other.out
    }

    /// `D(A)`: vertices outside `A` that every member of `A` points to.
    pub fn common_out_neighbors(&self, a: VertexSet) -> Result<VertexSet, DigraphError> {
        if a.is_empty() {
            return Err(DigraphError::EmptySet);
        }
        if let Some(v) = a.max_vertex().filter(|&v| v > self.n) {
            return Err(DigraphError::VertexOutOfRange(v));
        }
        Ok(common_out(&self.out, a, self.vertices()))
    }

    /// `A → B`: every vertex of `A` has an arc to every vertex of `B`.
    pub fn points_to(&self, a: VertexSet, b: VertexSet) -> bool {
        !a.is_empty() && a.is_disjoint(b) && a.iter().all(|i| b.is_subset(self.out[i - 1]))
    }

    pub fn is_directional(&self, p: DirectionalParams) -> Result<bool, DigraphError> {
        p.check_fits(self.n)?;
        Ok(directional_masks(&self.out, self.n, p))
    }

    pub fn is_tournament(&self) -> bool {
        self.arcs.len() == self.n * (self.n - 1) / 2
    }

    /// Orients every free pair `{i, j}` as `(min, max)`.
    pub fn complete_to_tournament(&self) -> Tournament {
        let mut arcs = self.arcs.clone();
        for i in 1..=self.n {
            for j in i + 1..=self.n {
                if !self.has_arc(i, j) && !self.has_arc(j, i) {
                    arcs.push((i, j));
                }
            }
        }
        Tournament(Digraph::new(self.n, arcs).expect("completion keeps the digraph invariants"))
    }

    /// All `3^{C(n,2)}` labeled digraphs on `[n]`, arcs listed lexicographically.
    pub fn enumerate_all(n: usize) -> Vec<Digraph> {
        let pairs: Vec<(usize, usize)> = (1..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .collect();
        let total = 3usize.pow(pairs.len() as u32);
        (0..total)
            .map(|mut code| {
                let mut arcs = Vec::new();
                for &(i, j) in &pairs {
                    match code % 3 {
                        1 => arcs.push((i, j)),
                        2 => arcs.push((j, i)),
                        _ => {}
                    }
                    code /= 3;
                }
                arcs.sort_unstable();
                Digraph::new(n, arcs).expect("enumerated digraphs are valid")
            })
            .collect()
    }
}

impl fmt::Debug for Digraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digraph(n={}, arcs={:?})", self.n, self.arcs)
    }
}

#[derive(Serialize, Deserialize)]
struct RawDigraph {
    n: usize,
    arcs: Vec<[usize; 2]>,
}

impl Serialize for Digraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawDigraph {
            n: self.n,
            arcs: self.arcs.iter().map(|&(i, j)| [i, j]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Digraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawDigraph::deserialize(deserializer)?;
        Digraph::new(raw.n, raw.arcs.into_iter().map(|[i, j]| (i, j))).map_err(serde::de::Error::custom)
    }
}

/// A digraph with exactly one arc between every pair of vertices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tournament(Digraph);

impl Tournament {
    pub fn as_digraph(&self) -> &Digraph {
        &self.0
    }

    pub fn into_digraph(self) -> Digraph {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn is_directional(&self, p: DirectionalParams) -> Result<bool, DigraphError> {
        self.0.is_directional(p)
    }

    /// Adds vertex `n + 1` pointing at every existing vertex. Any `A`
    /// containing the new vertex inherits a witness `B` from `A \ {n+1}`.
    pub fn extend_directional(&self, p: DirectionalParams) -> Result<Tournament, DigraphError> {
        if !self.is_directional(p)? {
            return Err(DigraphError::NotDirectional { r1: p.r1, r2: p.r2 });
        }
        let n = self.n();
        if n + 1 > MAX_VERTICES {
            return Err(DigraphError::TooManyVertices(n + 1));
        }
        let arcs = self.0.arcs.iter().copied().chain((1..=n).map(|i| (n + 1, i)));
        Ok(Tournament(Digraph::new(n + 1, arcs)?))
    }

    /// Bit `b` of the result is set when pair number `b` (lexicographic over
    /// `i < j`) is oriented `i → j`.
    pub fn to_code(&self) -> u64 {
        let mut code = 0u64;
        for (b, (i, j)) in pair_list(self.n()).into_iter().enumerate() {
            if self.0.has_arc(i, j) {
                code |= 1 << b;
            }
        }
        code
    }

    pub fn from_code(n: usize, code: u64) -> Result<Tournament, DigraphError> {
        let arcs = pair_list(n)
            .into_iter()
            .enumerate()
            .map(|(b, (i, j))| if code >> b & 1 == 1 { (i, j) } else { (j, i) });
        Ok(Tournament(Digraph::new(n, arcs)?))
    }
}

impl TryFrom<Digraph> for Tournament {
    type Error = DigraphError;

    fn try_from(d: Digraph) -> Result<Self, Self::Error> {
        for i in 1..=d.n {
            for j in i + 1..=d.n {
                if !d.has_arc(i, j) && !d.has_arc(j, i) {
                    return Err(DigraphError::NotTournament(i, j));
                }
            }
        }
        Ok(Tournament(d))
    }
}

impl Serialize for Tournament {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tournament {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let d = Digraph::deserialize(deserializer)?;
        Tournament::try_from(d).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectionalParams {
    pub r1: usize,
    pub r2: usize,
}

impl DirectionalParams {
    pub fn new(r1: usize, r2: usize) -> Result<Self, DigraphError> {
        if r1 == 0 || r2 == 0 {
            return Err(DigraphError::InvalidParams);
        }
        Ok(DirectionalParams { r1, r2 })
    }

    pub fn min_vertices(self) -> usize {
        self.r1 + self.r2
    }

    fn check_fits(self, n: usize) -> Result<(), DigraphError> {
        if n < self.min_vertices() {
            return Err(DigraphError::ParamsTooLarge { n, needed: self.min_vertices() });
        }
        Ok(())
    }
}

fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect()
}

fn common_out(out: &[VertexSet], a: VertexSet, all: VertexSet) -> VertexSet {
    a.iter()
        .fold(all, |acc, i| acc.intersection(out[i - 1]))
        .difference(a)
}

fn directional_masks(out: &[VertexSet], n: usize, p: DirectionalParams) -> bool {
    let all = VertexSet::full(n);
    let limit = 1u128 << n;
    // Gosper's hack over r1-subsets of [n].
    let mut a: u128 = (1u128 << p.r1) - 1;
    while a < limit {
        if common_out(out, VertexSet(a as u64), all).len() < p.r2 {
            return false;
        }
        let c = a & a.wrapping_neg();
        let r = a + c;
        a = (((r ^ a) >> 2) / c) | r;
    }
    true
}

/// Each pair `i < j` is oriented by an independent fair coin drawn in
/// lexicographic pair order from a ChaCha8 stream seeded with `seed`.
pub fn random_tournament(n: usize, seed: u64) -> Result<Tournament, DigraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tournament_with(n, &mut rng)
}

fn random_tournament_with<R: Rng>(n: usize, rng: &mut R) -> Result<Tournament, DigraphError> {
    let arcs: Vec<(usize, usize)> = pair_list(n)
        .into_iter()
        .map(|(i, j)| if rng.random_bool(0.5) { (i, j) } else { (j, i) })
        .collect();
    Ok(Tournament(Digraph::new(n, arcs)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found { tournament: Tournament, iterations: u64 },
    NotFound { iterations: u64 },
}

/// Samples random tournaments on `[n]` from one seeded stream until one is
/// `p`-directional, giving up after `max_iters` samples.
pub fn search_directional(
    n: usize,
    p: DirectionalParams,
    seed: u64,
    max_iters: u64,
) -> Result<SearchOutcome, DigraphError> {
    p.check_fits(n)?;
    if n > MAX_VERTICES {
        return Err(DigraphError::TooManyVertices(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for it in 1..=max_iters {
        let t = random_tournament_with(n, &mut rng)?;
        if directional_masks(&t.0.out, n, p) {
            return Ok(SearchOutcome::Found { tournament: t, iterations: it });
        }
    }
    Ok(SearchOutcome::NotFound { iterations: max_iters })
}

/// Lower bound `1 - C(n,r1)(1 - 2^{-r1 r2})^{⌊(n-r1)/r2⌋}` on the chance that
/// a uniform random tournament on `[n]` is `p`-directional (may be negative).
pub fn directional_probability_lower_bound(n: usize, p: DirectionalParams) -> f64 {
    1.0 - union_bound_log2(n, p).exp2()
}

fn union_bound_log2(n: usize, p: DirectionalParams) -> f64 {
    let binom_log2: f64 = (0..p.r1)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).log2())
        .sum();
    let groups = ((n - p.r1) / p.r2) as f64;
    let fail = (-(-((p.r1 * p.r2) as f64)).exp2()).ln_1p() / std::f64::consts::LN_2;
    binom_log2 + groups * fail
}

/// `C(n,r1)·(2^{r1 r2} - 1)^m < 2^{r1 r2 m}` with `m = ⌊(n-r1)/r2⌋`, exactly.
fn union_bound_below_one(n: usize, p: DirectionalParams) -> bool {
    let m = ((n - p.r1) / p.r2) as u32;
    let bits = (p.r1 * p.r2) as u32;
    let mut binom = BigUint::one();
    for i in 0..p.r1 {
        binom = binom * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    let two_bits = BigUint::from(2u8).pow(bits);
    let lhs = binom * (&two_bits - BigUint::one()).pow(m);
    let rhs = two_bits.pow(m);
    lhs < rhs
}

/// Smallest `n ≥ r1 + r2` at which the union bound drops below 1. A float
/// estimate skips values clearly above the threshold; every candidate is
/// certified in integer arithmetic.
pub fn bound_s(p: DirectionalParams) -> usize {
    let mut n = p.min_vertices();
    loop {
        if union_bound_log2(n, p) < 1e-6 && union_bound_below_one(n, p) {
            return n;
        }
        n += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinS {
    Found { n: usize, witness: Tournament },
    Unknown { n_max: usize },
}

/// Smallest `n` in `r1+r2 ..= n_max` admitting a `p`-directional tournament,
/// by enumerating every labeled tournament. The witness is the one with the
/// smallest pair code, so results do not depend on worker scheduling.
pub fn min_s_exhaustive(p: DirectionalParams, n_max: usize) -> Result<MinS, DigraphError> {
    p.check_fits(n_max)?;
    if n_max > MAX_EXHAUSTIVE_VERTICES {
        return Err(DigraphError::EnumerationTooLarge(n_max));
    }
    for n in p.min_vertices()..=n_max {
        if let Some(witness) = first_directional_tournament(n, p)? {
            return Ok(MinS::Found { n, witness });
        }
    }
    Ok(MinS::Unknown { n_max })
}

/// Exhaustive scan of the `2^{C(n,2)}` tournaments on `[n]`.
pub fn first_directional_tournament(
    n: usize,
    p: DirectionalParams,
) -> Result<Option<Tournament>, DigraphError> {
    p.check_fits(n)?;
    if n > MAX_EXHAUSTIVE_VERTICES {
        return Err(DigraphError::EnumerationTooLarge(n));
    }
    let pairs = pair_list(n);
    let total: u64 = 1 << pairs.len();
    const SHARD: u64 = 1 << 14;
    let shards = total.div_ceil(SHARD);
    let hit = (0..shards).into_par_iter().find_map_first(|shard| {
        let mut out = vec![VertexSet::EMPTY; n];
        let end = ((shard + 1) * SHARD).min(total);
        (shard * SHARD..end).find(|&code| {
            out.iter_mut().for_each(|o| *o = VertexSet::EMPTY);
            for (b, &(i, j)) in pairs.iter().enumerate() {
                if code >> b & 1 == 1 {
                    out[i - 1].0 |= 1 << (j - 1);
                } else {
                    out[j - 1].0 |= 1 << (i - 1);
                }
            }
            directional_masks(&out, n, p)
        })
    });
    hit.map(|code| Tournament::from_code(n, code)).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> Digraph {
        Digraph::new(3, [(1, 3), (3, 2), (2, 1)]).unwrap()
    }

    fn transitive3() -> Digraph {
        Digraph::new(3, [(1, 2), (2, 3), (1, 3)]).unwrap()
    }

    fn p(r1: usize, r2: usize) -> DirectionalParams {
        DirectionalParams::new(r1, r2).unwrap()
    }

    #[test]
    fn validate_accepts_and_rejects() {
        assert_eq!(cycle3().arcs().len(), 3);
        assert!(Digraph::empty(2).unwrap().arcs().is_empty());
        assert_eq!(Digraph::new(2, [(1, 2), (2, 1)]), Err(DigraphError::TwoCycle(1, 2)));
        assert_eq!(Digraph::new(3, [(2, 2)]), Err(DigraphError::SelfLoop(2)));
        assert_eq!(Digraph::new(3, [(1, 4)]), Err(DigraphError::VertexOutOfRange(4)));
        assert_eq!(Digraph::new(3, [(0, 1)]), Err(DigraphError::VertexOutOfRange(0)));
        assert_eq!(Digraph::new(3, [(1, 2), (1, 2)]), Err(DigraphError::DuplicateArc(1, 2)));
        assert_eq!(Digraph::new(0, []), Err(DigraphError::NoVertices));
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let text = r#"{"n":3,"arcs":[[1,3],[3,2],[2,1]]}"#;
        let d: Digraph = serde_json::from_str(text).unwrap();
        assert_eq!(d, cycle3());
        assert_eq!(serde_json::to_string(&d).unwrap(), text);
        let t: Tournament = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), text);
        assert!(serde_json::from_str::<Digraph>(r#"{"n":2,"arcs":[[1,2],[2,1]]}"#).is_err());
        assert!(serde_json::from_str::<Tournament>(r#"{"n":3,"arcs":[[1,2]]}"#).is_err());
    }

    #[test]
    fn common_out_neighbors_examples() {
        let d = cycle3();
        assert_eq!(d.common_out_neighbors(VertexSet::singleton(1)).unwrap(), VertexSet::singleton(3));
        assert_eq!(d.common_out_neighbors(VertexSet::full(3)).unwrap(), VertexSet::EMPTY);
        let d2 = Digraph::new(3, [(1, 2), (3, 2)]).unwrap();
        let a = VertexSet::from_vertices([1, 3]);
        assert_eq!(d2.common_out_neighbors(a).unwrap(), VertexSet::singleton(2));
        assert_eq!(d.common_out_neighbors(VertexSet::EMPTY), Err(DigraphError::EmptySet));
        assert_eq!(
            d.common_out_neighbors(VertexSet::singleton(5)),
            Err(DigraphError::VertexOutOfRange(5))
        );
    }

    #[test]
    fn is_directional_examples() {
        assert!(cycle3().is_directional(p(1, 1)).unwrap());
        assert!(!transitive3().is_directional(p(1, 1)).unwrap());
        assert!(!Digraph::empty(3).unwrap().is_directional(p(1, 1)).unwrap());
        assert_eq!(
            cycle3().is_directional(p(2, 2)),
            Err(DigraphError::ParamsTooLarge { n: 3, needed: 4 })
        );
    }

    #[test]
    fn directional_matches_brute_force() {
        // Check the Gosper loop against a direct subset enumeration.
        for seed in 0..40 {
            let t = random_tournament(6, seed).unwrap();
            for (r1, r2) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 5), (5, 1)] {
                let pp = p(r1, r2);
                let brute = VertexSet::full(6).subsets_of_size(r1).into_iter().all(|a| {
                    VertexSet::full(6)
                        .difference(a)
                        .subsets_of_size(r2)
                        .into_iter()
                        .any(|b| t.as_digraph().points_to(a, b))
                });
                assert_eq!(t.is_directional(pp).unwrap(), brute, "seed {seed} {pp:?}");
            }
        }
    }

    #[test]
    fn completion_examples() {
        let c = cycle3().complete_to_tournament();
        assert!(c.as_digraph().same_arcs(&cycle3()));
        let e = Digraph::empty(3).unwrap().complete_to_tournament();
        assert_eq!(e.as_digraph().sorted_arcs(), vec![(1, 2), (1, 3), (2, 3)]);
        let d = Digraph::new(3, [(2, 1)]).unwrap().complete_to_tournament();
        assert_eq!(d.as_digraph().arcs(), &[(2, 1), (1, 3), (2, 3)]);
    }

    #[test]
    fn extension_keeps_directionality() {
        let t = Tournament::try_from(cycle3()).unwrap();
        let t4 = t.extend_directional(p(1, 1)).unwrap();
        assert_eq!(t4.n(), 4);
        assert!(t4.as_digraph().out_neighbors(4) == VertexSet::full(3));
        assert!(t4.is_directional(p(1, 1)).unwrap());
        let t5 = t4.extend_directional(p(1, 1)).unwrap();
        assert!(t5.is_directional(p(1, 1)).unwrap());
        let tr = Tournament::try_from(transitive3()).unwrap();
        assert_eq!(tr.extend_directional(p(1, 1)), Err(DigraphError::NotDirectional { r1: 1, r2: 1 }));
    }

    #[test]
    fn random_tournament_contract() {
        assert!(random_tournament(1, 3).unwrap().as_digraph().arcs().is_empty());
        assert_eq!(random_tournament(5, 42).unwrap(), random_tournament(5, 42).unwrap());
        let hits = (0..10_000).filter(|&s| random_tournament(4, s).unwrap().as_digraph().has_arc(1, 2)).count();
        let frac = hits as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn code_round_trip() {
        for seed in 0..20 {
            let t = random_tournament(6, seed).unwrap();
            let back = Tournament::from_code(6, t.to_code()).unwrap();
            assert!(back.as_digraph().same_arcs(t.as_digraph()));
        }
    }

    #[test]
    fn search_examples() {
        match search_directional(3, p(1, 1), 5, 1000).unwrap() {
            SearchOutcome::Found { tournament, iterations } => {
                assert!(tournament.is_directional(p(1, 1)).unwrap());
                assert!(iterations < 100);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            search_directional(2, p(1, 1), 5, 50).unwrap(),
            SearchOutcome::NotFound { iterations: 50 }
        );
        assert!(search_directional(2, p(2, 1), 0, 1).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(bound_s(p(1, 1)), 3);
        // C(20,2)(3/4)^18 ≈ 1.07 and C(21,2)(3/4)^19 ≈ 0.89.
        assert!(!union_bound_below_one(20, p(2, 1)));
        assert!(union_bound_below_one(21, p(2, 1)));
        assert_eq!(bound_s(p(2, 1)), 21);
        // Direct loop for (1,2): n (3/4)^⌊(n-1)/2⌋ < 1.
        let direct = (3..)
            .find(|&n: &usize| (n as f64) * 0.75f64.powi(((n - 1) / 2) as i32) < 1.0)
            .unwrap();
        assert_eq!(bound_s(p(1, 2)), direct);
    }

    #[test]
    fn minimum_by_enumeration() {
        match min_s_exhaustive(p(1, 1), 4).unwrap() {
            MinS::Found { n, witness } => {
                assert_eq!(n, 3);
                assert!(witness.is_directional(p(1, 1)).unwrap());
            }
            other => panic!("{other:?}"),
        }
        // Min out-degree 2 needs 5 vertices: on 4 the average out-degree is 1.5.
        assert!(matches!(min_s_exhaustive(p(1, 2), 5).unwrap(), MinS::Found { n: 5, .. }));
        assert_eq!(min_s_exhaustive(p(2, 2), 4).unwrap(), MinS::Unknown { n_max: 4 });
        assert_eq!(min_s_exhaustive(p(1, 1), 9), Err(DigraphError::EnumerationTooLarge(9)));
    }

    #[test]
    fn directional_count_on_three_vertices() {
        // Two of the eight labeled tournaments on [3] are 3-cycles.
        let count = (0..8u64)
            .filter(|&c| Tournament::from_code(3, c).unwrap().is_directional(p(1, 1)).unwrap())
            .count();
        assert_eq!(count, 2);
    }

    #[test]
    fn set_syntax() {
        let s: VertexSet = "{1,3}".parse().unwrap();
        assert_eq!(s.to_vec(), vec![1, 3]);
        assert_eq!(s.to_string(), "{1,3}");
        assert_eq!(" 2 ".parse::<VertexSet>().unwrap(), VertexSet::singleton(2));
        assert!("{1,1}".parse::<VertexSet>().is_err());
        assert!("{1,x}".parse::<VertexSet>().is_err());
        assert!("{1,2".parse::<VertexSet>().is_err());
        assert_eq!("{}".parse::<VertexSet>().unwrap(), VertexSet::EMPTY);
    }

    #[test]
    fn subset_orders_are_lexicographic() {
        let all = VertexSet::full(4);
        let two: Vec<String> = all.subsets_of_size(2).iter().map(|s| s.to_string()).collect();
        assert_eq!(two, ["{1,2}", "{1,3}", "{1,4}", "{2,3}", "{2,4}", "{3,4}"]);
        let subs = VertexSet::from_vertices([1, 3]).nonempty_subsets();
        assert_eq!(subs, vec![
            VertexSet::singleton(1),
            VertexSet::from_vertices([1, 3]),
            VertexSet::singleton(3)
        ]);
        assert_eq!(all.subsets_of_size(0), vec![VertexSet::EMPTY]);
        assert!(all.subsets_of_size(5).is_empty());
    }

    #[test]
    fn enumerate_all_counts() {
        assert_eq!(Digraph::enumerate_all(3).len(), 27);
        assert_eq!(Digraph::enumerate_all(2).len(), 3);
    }

    fn arb_digraph() -> impl proptest::strategy::Strategy<Value = Digraph> {
        use proptest::prelude::*;
        (2usize..=6).prop_flat_map(|n| {
            proptest::collection::vec(0u8..3, n * (n - 1) / 2).prop_map(move |choice| {
                let pairs = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j)));
                let arcs = pairs.zip(choice).filter_map(|((i, j), c)| match c {
                    1 => Some((i, j)),
                    2 => Some((j, i)),
                    _ => None,
                });
                Digraph::new(n, arcs).unwrap()
            })
        })
    }

    proptest::proptest! {
        #[test]
        fn completion_keeps_directionality(d in arb_digraph()) {
            let t = d.complete_to_tournament();
            for (r1, r2) in [(1, 1), (1, 2), (2, 1)] {
                if d.n() >= r1 + r2 && d.is_directional(p(r1, r2)).unwrap() {
                    proptest::prop_assert!(t.is_directional(p(r1, r2)).unwrap());
                }
            }
        }

        #[test]
        fn points_to_is_common_out_neighbourhood(d in arb_digraph(), a_bits in 1u64..64, b_bits in 1u64..64) {
            let all = d.vertices();
            let a = VertexSet::from_bits(a_bits).intersection(all);
            let b = VertexSet::from_bits(b_bits).intersection(all).difference(a);
            if !a.is_empty() && !b.is_empty() {
                let common = d.common_out_neighbors(a).unwrap();
                proptest::prop_assert_eq!(d.points_to(a, b), b.is_subset(common));
            }
        }
    }
}
