//! The set-selection game `G_{r1,r2}` on hitting times.
//!
//! Player I picks `A` with `|A| = r1`, Player II answers with a disjoint
//! `B`, `|B| = r2`, and then Player I picks both nonempty `A' ⊆ A` and
//! `B' ⊆ B`. If the first hitting time among `A' ∪ B'` belongs to `A'`,
//! Player II pays `|B'|`; otherwise Player I pays `|A'|`.

use std::io::{BufRead, Write};

use num_traits::{One, Signed, Zero};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{new_chain, race, ChainError, ChainParams};
use crate::digraph::{
    first_directional_tournament, min_s_exhaustive, search_directional, Digraph, DigraphError, DirectionalParams,
    MinS, SearchOutcome, Tournament, VertexSet, MAX_EXHAUSTIVE_VERTICES,
};
use crate::exact::{ranking_graph, ExactError, GroupProbCache};
use crate::pattern::{generate_patterns, Pattern, PatternError};
use crate::rational::{as_string, int, to_f64, Ratio};

/// Largest `n` accepted by [`solve_game`].
pub const GAME_MAX_N: usize = 8;
/// Largest `n` accepted by [`is_two_determined`].
pub const TWO_DETERMINED_MAX_N: usize = 6;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("need r1, r2 >= 1 and n >= r1 + r2 (n = {n}, r1 = {r1}, r2 = {r2})")]
    Infeasible { n: usize, r1: usize, r2: usize },
    #[error("n = {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("sets {0} and {1} overlap")]
    Overlap(VertexSet, VertexSet),
    #[error("sets must be nonempty")]
    EmptySet,
    #[error("probabilities over the chosen sets sum to {0}, not 1")]
    NotNormalized(Ratio),
    #[error("set {0} is outside the probability vector")]
    OutOfRange(VertexSet),
    #[error("no ({r1},{r2})-directional tournament on {n} vertices found by search")]
    SearchExhausted { n: usize, r1: usize, r2: usize },
    #[error("input ended before the game finished")]
    UnexpectedEof,
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Digraph(#[from] DigraphError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, GameError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompetitionModel {
    /// Hitting times of the patterns generated by `digraph`, on `X^{(N, n+1)}`.
    Pattern { digraph: Digraph, symbols: usize },
    /// `n` exchangeable hitting times, e.g. first visits of an i.i.d. chain.
    Symmetric { n: usize },
}

impl CompetitionModel {
    pub fn n(&self) -> usize {
        match self {
            CompetitionModel::Pattern { digraph, .. } => digraph.n(),
            CompetitionModel::Symmetric { n } => *n,
        }
    }

    /// Generated patterns and alphabet size, for pattern models.
    pub fn patterns(&self) -> Result<Option<(Vec<Pattern>, usize)>> {
        match self {
            CompetitionModel::Pattern { digraph, symbols } => Ok(Some((generate_patterns(digraph)?, *symbols))),
            CompetitionModel::Symmetric { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub r1: usize,
    pub r2: usize,
    pub model: CompetitionModel,
}

impl GameSpec {
    pub fn new(r1: usize, r2: usize, model: CompetitionModel) -> Result<Self> {
        let n = model.n();
        if r1 == 0 || r2 == 0 || n < r1 + r2 {
            return Err(GameError::Infeasible { n, r1, r2 });
        }
        Ok(GameSpec { r1, r2, model })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }
}

/// Group first-arrival probabilities for one model, memoized.
pub struct Evaluator {
    n: usize,
    cache: Option<GroupProbCache>,
}

impl Evaluator {
    pub fn new(model: &CompetitionModel) -> Result<Self> {
        let n = model.n();
        if n < 2 {
            return Err(GameError::Infeasible { n, r1: 1, r2: 1 });
        }
        let cache = model.patterns()?.map(|(pats, symbols)| GroupProbCache::new(pats, symbols));
        Ok(Evaluator { n, cache })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(T^{(A')} < T^{(B')})`.
    pub fn group_prob(&self, a: VertexSet, b: VertexSet) -> Result<Ratio> {
        check_pair(a, b)?;
        if a.union(b).max_vertex().is_some_and(|m| m > self.n) {
            return Err(GameError::OutOfRange(a.union(b)));
        }
        match &self.cache {
            Some(cache) => Ok(cache.group_prob(a, b)?),
            None => Ok(Ratio::new((a.len() as i64).into(), ((a.len() + b.len()) as i64).into())),
        }
    }

    /// `|B'|·P(A' first) − |A'|·P(B' first)`.
    pub fn payoff(&self, a: VertexSet, b: VertexSet) -> Result<Ratio> {
        let win = self.group_prob(a, b)?;
        let lose = self.group_prob(b, a)?;
        assert!((&win + &lose).is_one(), "P(A' first) + P(B' first) = {} != 1", &win + &lose);
        Ok(int(b.len() as u64) * win - int(a.len() as u64) * lose)
    }
}

fn check_pair(a: VertexSet, b: VertexSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(GameError::EmptySet);
    }
    if !a.is_disjoint(b) {
        return Err(GameError::Overlap(a, b));
    }
    Ok(())
}

pub fn payoff(model: &CompetitionModel, a: VertexSet, b: VertexSet) -> Result<Ratio> {
    Evaluator::new(model)?.payoff(a, b)
}

/// True iff the mean of `p` over `A` strictly exceeds its mean over `B`.
/// `p[v - 1]` is the probability attached to vertex `v`.
pub fn smallness(p: &[Ratio], a: VertexSet, b: VertexSet) -> Result<bool> {
    check_pair(a, b)?;
    let union = a.union(b);
    if union.max_vertex().is_some_and(|m| m > p.len()) {
        return Err(GameError::OutOfRange(union));
    }
    let total: Ratio = union.iter().map(|v| &p[v - 1]).sum();
    if !total.is_one() {
        return Err(GameError::NotNormalized(total));
    }
    Ok(mean(p, a) > mean(p, b))
}

fn mean(p: &[Ratio], set: VertexSet) -> Ratio {
    set.iter().map(|v| &p[v - 1]).sum::<Ratio>() / int(set.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoDetermined {
    pub holds: bool,
    /// First `(A, B)` with `A → B` but `mean_B p ≤ mean_A p`.
    pub witness: Option<(VertexSet, VertexSet)>,
    /// Number of `(A, B)` pairs with `A → B` that were checked.
    pub checked: usize,
}

/// Checks that `A → B` in the ranking graph forces the mean first-arrival
/// probability over `B` above the mean over `A`, for every disjoint pair.
pub fn is_two_determined(patterns: &[Pattern], symbols: usize) -> Result<TwoDetermined> {
    let n = patterns.len();
    if n > TWO_DETERMINED_MAX_N {
        return Err(GameError::TooLarge { n, limit: TWO_DETERMINED_MAX_N });
    }
    let graph = ranking_graph(patterns, symbols)?;
    let cache = GroupProbCache::new(patterns.to_vec(), symbols);
    let full = VertexSet::full(n);
    let mut checked = 0;
    for a in full.nonempty_subsets() {
        for b in full.difference(a).nonempty_subsets() {
            if !graph.points_to(a, b) {
                continue;
            }
            checked += 1;
            let union = a.union(b);
            let probs = cache.probabilities(union)?;
            let mut p = vec![Ratio::zero(); n];
            for (v, x) in union.iter().zip(probs) {
                p[v - 1] = x;
            }
            if mean(&p, b) <= mean(&p, a) {
                return Ok(TwoDetermined { holds: false, witness: Some((a, b)), checked });
            }
        }
    }
    Ok(TwoDetermined { holds: true, witness: None, checked })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameClass {
    FavorableToII,
    Fair,
    UnfavorableToII,
}

impl GameClass {
    pub fn of(value: &Ratio) -> Self {
        if value.is_negative() {
            GameClass::FavorableToII
        } else if value.is_zero() {
            GameClass::Fair
        } else {
            GameClass::UnfavorableToII
        }
    }
}

/// Player I's best step-3 choice against a given `(A, B)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step3 {
    pub b: VertexSet,
    pub a_prime: VertexSet,
    pub b_prime: VertexSet,
    #[serde(with = "as_string")]
    pub value: Ratio,
}

/// Everything that follows a given top-level `A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AReply {
    pub a: VertexSet,
    /// Player II's optimal `B`.
    pub best_b: VertexSet,
    #[serde(with = "as_string")]
    pub value: Ratio,
    /// One entry per admissible `B`, in lexicographic order.
    pub responses: Vec<Step3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub r1: usize,
    pub r2: usize,
    pub n: usize,
    #[serde(with = "as_string")]
    pub value: Ratio,
    pub value_approx: f64,
    pub class: GameClass,
    pub optimal_a: VertexSet,
    /// One entry per admissible `A`, in lexicographic order.
    pub tree: Vec<AReply>,
}

impl GameReport {
    pub fn reply(&self, a: VertexSet) -> Option<&AReply> {
        self.tree.iter().find(|r| r.a == a)
    }
}

impl AReply {
    pub fn response(&self, b: VertexSet) -> Option<&Step3> {
        self.responses.iter().find(|r| r.b == b)
    }
}

fn best_step3(eval: &Evaluator, a: VertexSet, b: VertexSet) -> Result<Step3> {
    let mut best: Option<Step3> = None;
    for a_prime in a.nonempty_subsets() {
        for b_prime in b.nonempty_subsets() {
            let value = eval.payoff(a_prime, b_prime)?;
            if best.as_ref().is_none_or(|s| value > s.value) {
                best = Some(Step3 { b, a_prime, b_prime, value });
            }
        }
    }
    Ok(best.expect("A and B are nonempty"))
}

fn solve_for_a(eval: &Evaluator, a: VertexSet, r2: usize) -> Result<AReply> {
    let rest = VertexSet::full(eval.n()).difference(a);
    let responses: Vec<Step3> = rest
        .subsets_of_size(r2)
        .into_iter()
        .map(|b| best_step3(eval, a, b))
        .collect::<Result<_>>()?;
    let best = responses
        .iter()
        .fold(None::<&Step3>, |acc, s| match acc {
            Some(m) if s.value >= m.value => Some(m),
            _ => Some(s),
        })
        .expect("at least one B");
    Ok(AReply { a, best_b: best.b, value: best.value.clone(), responses })
}

/// Backward induction over all pure strategies.
pub fn solve_game(spec: &GameSpec) -> Result<GameReport> {
    let n = spec.n();
    let spec = GameSpec::new(spec.r1, spec.r2, spec.model.clone())?;
    if n > GAME_MAX_N {
        return Err(GameError::TooLarge { n, limit: GAME_MAX_N });
    }
    let eval = Evaluator::new(&spec.model)?;
    let tree: Vec<AReply> = VertexSet::full(n)
        .subsets_of_size(spec.r1)
        .into_par_iter()
        .map(|a| solve_for_a(&eval, a, spec.r2))
        .collect::<Result<_>>()?;
    let best = tree
        .iter()
        .fold(None::<&AReply>, |acc, r| match acc {
            Some(m) if r.value <= m.value => Some(m),
            _ => Some(r),
        })
        .expect("at least one A");
    Ok(GameReport {
        r1: spec.r1,
        r2: spec.r2,
        n,
        value: best.value.clone(),
        value_approx: to_f64(&best.value),
        class: GameClass::of(&best.value),
        optimal_a: best.a,
        tree,
    })
}

/// `n` exchangeable hitting times.
pub fn build_fair(n: usize) -> Result<CompetitionModel> {
    if n < 2 {
        return Err(GameError::Infeasible { n, r1: 1, r2: 1 });
    }
    Ok(CompetitionModel::Symmetric { n })
}

/// The transitive tournament `i → j` for all `i < j`, so every `i < n` has
/// the arc `(i, n)` and `T_n` tends to arrive first.
pub fn build_unfavorable(n: usize, r1: usize, r2: usize) -> Result<GameSpec> {
    let arcs = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j)));
    let digraph = Digraph::new(n, arcs)?;
    GameSpec::new(r1, r2, CompetitionModel::Pattern { digraph, symbols: n + 1 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Favorable {
    Model { spec: GameSpec, tournament: Tournament },
    /// No `(r1, r2)`-directional tournament on `[n]` exists.
    Impossible,
}

/// Random-search budget used by [`build_favorable`] beyond exhaustive range.
pub const FAVORABLE_SEARCH_ITERS: u64 = 20_000;

/// A game over an `(r1, r2)`-directional tournament on `[n]`, if one can
/// be produced.
///
/// Up to 7 vertices the answer is decided by enumeration. Beyond that a
/// seeded random search runs first, then a smaller exhaustive witness is
/// grown one dominating vertex at a time.
pub fn build_favorable(r1: usize, r2: usize, n: usize) -> Result<Favorable> {
    if r1 == 0 || r2 == 0 || n < r1 + r2 {
        return Ok(Favorable::Impossible);
    }
    let p = DirectionalParams::new(r1, r2)?;
    let tournament = if n < MAX_EXHAUSTIVE_VERTICES {
        match first_directional_tournament(n, p)? {
            Some(t) => t,
            None => return Ok(Favorable::Impossible),
        }
    } else {
        match search_directional(n, p, 0, FAVORABLE_SEARCH_ITERS)? {
            SearchOutcome::Found { tournament, .. } => tournament,
            SearchOutcome::NotFound { .. } => {
                let small = MAX_EXHAUSTIVE_VERTICES - 1;
                match (p.min_vertices() <= small).then(|| min_s_exhaustive(p, small)).transpose()? {
                    Some(MinS::Found { witness, .. }) => {
                        let mut t = witness;
                        while t.n() < n {
                            t = t.extend_directional(p)?;
                        }
                        t
                    }
                    _ => return Err(GameError::SearchExhausted { n, r1, r2 }),
                }
            }
        }
    };
    let model = CompetitionModel::Pattern { digraph: tournament.as_digraph().clone(), symbols: n + 1 };
    Ok(Favorable::Model { spec: GameSpec::new(r1, r2, model)?, tournament })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    PlayerI,
    PlayerII,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub human: Role,
    pub seed: u64,
    pub a: VertexSet,
    pub b: VertexSet,
    pub a_prime: VertexSet,
    pub b_prime: VertexSet,
    /// `P(T^{(A')} < T^{(B')})`, the chance that Player I wins.
    #[serde(with = "as_string")]
    pub p_player_one: Ratio,
    #[serde(with = "as_string")]
    pub expected_payoff: Ratio,
    /// 1-based vertex whose hitting time arrived first in the simulation.
    pub first_arrival: usize,
    pub winner: Role,
    /// Realized payoff to Player I.
    pub payoff: i64,
    pub lines: Vec<String>,
}

struct Session<'a, R, W> {
    input: R,
    out: W,
    lines: &'a mut Vec<String>,
}

impl<R: BufRead, W: Write> Session<'_, R, W> {
    fn say(&mut self, line: String) -> Result<()> {
        writeln!(self.out, "{line}")?;
        self.lines.push(line);
        Ok(())
    }

    /// Prompts until the reply parses and passes `check`.
    fn ask(&mut self, prompt: &str, check: impl Fn(VertexSet) -> std::result::Result<(), String>) -> Result<VertexSet> {
        loop {
            write!(self.out, "{prompt} ")?;
            self.out.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(GameError::UnexpectedEof);
            }
            let reply = line.trim();
            let verdict = reply
                .parse::<VertexSet>()
                .map_err(|e| e.to_string())
                .and_then(|s| check(s).map(|_| s));
            self.lines.push(format!("{prompt} {reply}"));
            match verdict {
                Ok(s) => return Ok(s),
                Err(why) => self.say(format!("invalid choice: {why}"))?,
            }
        }
    }
}

/// Plays one round on a terminal. The engine takes whichever side the
/// human does not, using optimal replies from [`solve_game`]; step 4 is a
/// single seeded simulation.
pub fn interactive_play<R: BufRead, W: Write>(
    spec: &GameSpec,
    human: Role,
    seed: u64,
    input: R,
    out: W,
) -> Result<Transcript> {
    let report = solve_game(spec)?;
    let eval = Evaluator::new(&spec.model)?;
    let n = spec.n();
    let full = VertexSet::full(n);
    let mut lines = Vec::new();
    let mut s = Session { input, out, lines: &mut lines };
    s.say(format!(
        "G({},{}) on {} hitting times; game value to Player I = {}",
        spec.r1, spec.r2, n, report.value
    ))?;

    let r1 = spec.r1;
    let a = if human == Role::PlayerI && full.subsets_of_size(r1).len() > 1 {
        s.ask("A? >", |a| sized_subset(a, full, r1))?
    } else if human == Role::PlayerI {
        full.subsets_of_size(r1)[0]
    } else {
        report.optimal_a
    };
    s.say(format!("Player I chooses A = {a}"))?;

    let rest = full.difference(a);
    let r2 = spec.r2;
    let reply = report.reply(a).expect("every A is in the tree");
    let b = if human == Role::PlayerII && rest.subsets_of_size(r2).len() > 1 {
        s.ask("B? >", |b| sized_subset(b, rest, r2))?
    } else if human == Role::PlayerII {
        rest.subsets_of_size(r2)[0]
    } else {
        reply.best_b
    };
    s.say(format!("Player II chooses B = {b}"))?;

    let (a_prime, b_prime) = if human == Role::PlayerI {
        let ap = if a.len() > 1 { s.ask("A'? >", |x| nonempty_subset(x, a))? } else { a };
        let bp = if b.len() > 1 { s.ask("B'? >", |x| nonempty_subset(x, b))? } else { b };
        (ap, bp)
    } else {
        let step = reply.response(b).expect("every B is in the tree");
        (step.a_prime, step.b_prime)
    };
    s.say(format!("Player I races A' = {a_prime} against B' = {b_prime}"))?;

    let p_one = eval.group_prob(a_prime, b_prime)?;
    let expected = eval.payoff(a_prime, b_prime)?;
    s.say(format!(
        "P(win for I) = {p_one}, P(win for II) = {}, expected payoff to I = {expected}",
        Ratio::one() - &p_one
    ))?;

    let first = simulate_first(&spec.model, a_prime.union(b_prime), seed)?;
    let winner = if a_prime.contains(first) { Role::PlayerI } else { Role::PlayerII };
    let payoff = match winner {
        Role::PlayerI => b_prime.len() as i64,
        Role::PlayerII => -(a_prime.len() as i64),
    };
    s.say(format!("hitting time {first} arrives first"))?;
    s.say(match winner {
        Role::PlayerI => format!("Player I wins; Player II pays {}", b_prime.len()),
        Role::PlayerII => format!("Player II wins; Player I pays {}", a_prime.len()),
    })?;
    drop(s);
    Ok(Transcript {
        human,
        seed,
        a,
        b,
        a_prime,
        b_prime,
        p_player_one: p_one,
        expected_payoff: expected,
        first_arrival: first,
        winner,
        payoff,
        lines,
    })
}

fn sized_subset(s: VertexSet, within: VertexSet, size: usize) -> std::result::Result<(), String> {
    if !s.is_subset(within) {
        return Err(format!("{s} must be a subset of {within}"));
    }
    if s.len() != size {
        return Err(format!("{s} must have exactly {size} element(s)"));
    }
    Ok(())
}

fn nonempty_subset(s: VertexSet, within: VertexSet) -> std::result::Result<(), String> {
    if s.is_empty() {
        return Err("the set must be nonempty".into());
    }
    if !s.is_subset(within) {
        return Err(format!("{s} must be a subset of {within}"));
    }
    Ok(())
}

/// Which member of `set` hits first in one seeded run.
fn simulate_first(model: &CompetitionModel, set: VertexSet, seed: u64) -> Result<usize> {
    let ids = set.to_vec();
    match model.patterns()? {
        Some((pats, symbols)) => {
            let chosen: Vec<Pattern> = ids.iter().map(|&i| pats[i - 1].clone()).collect();
            let mut stream = new_chain(ChainParams::new(symbols, chosen[0].rows(), seed)?);
            let out = race(&mut stream, &chosen, None)?;
            Ok(ids[out.winner])
        }
        None => {
            let mut order = ids;
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Ok(order[0])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn s(v: &[usize]) -> VertexSet {
        VertexSet::from_vertices(v.iter().copied())
    }

    fn cycle3() -> Digraph {
        Digraph::new(3, [(1, 3), (3, 2), (2, 1)]).unwrap()
    }

    fn cycle_model() -> CompetitionModel {
        CompetitionModel::Pattern { digraph: cycle3(), symbols: 4 }
    }

    #[test]
    fn payoff_examples() {
        let sym = build_fair(3).unwrap();
        assert_eq!(payoff(&sym, s(&[1]), s(&[2])).unwrap(), Ratio::zero());
        assert_eq!(payoff(&sym, s(&[1]), s(&[2, 3])).unwrap(), Ratio::zero());
        assert_eq!(payoff(&build_fair(5).unwrap(), s(&[1, 2]), s(&[3, 4, 5])).unwrap(), Ratio::zero());
        assert_eq!(payoff(&cycle_model(), s(&[1]), s(&[3])).unwrap(), ratio(-1, 511));
        assert!(matches!(payoff(&sym, s(&[1]), s(&[1])), Err(GameError::Overlap(..))));
        assert!(matches!(payoff(&sym, VertexSet::EMPTY, s(&[1])), Err(GameError::EmptySet)));
    }

    #[test]
    fn smallness_examples() {
        let p1 = ratio(51 * 51, 10_000);
        let rest = (Ratio::one() - &p1) / int(2);
        let p = vec![p1, rest.clone(), rest];
        assert!(smallness(&p, s(&[2, 3]), s(&[1])).unwrap());
        assert!(!smallness(&p, s(&[1]), s(&[2, 3])).unwrap());
        let uniform = vec![ratio(1, 3); 3];
        assert!(!smallness(&uniform, s(&[1]), s(&[2, 3])).unwrap());
        assert!(!smallness(&uniform, s(&[2, 3]), s(&[1])).unwrap());
        let two = vec![ratio(3, 5), ratio(2, 5)];
        assert!(smallness(&two, s(&[1]), s(&[2])).unwrap());
        assert!(matches!(smallness(&two, s(&[1]), s(&[1])), Err(GameError::Overlap(..))));
        assert!(matches!(smallness(&uniform, s(&[1]), s(&[2])), Err(GameError::NotNormalized(_))));
    }

    #[test]
    fn two_determined_examples() {
        let pats = generate_patterns(&cycle3()).unwrap();
        let res = is_two_determined(&pats, 4).unwrap();
        assert!(res.holds && res.checked > 0);
        let empty = generate_patterns(&Digraph::empty(3).unwrap()).unwrap();
        let res = is_two_determined(&empty, 4).unwrap();
        assert!(res.holds);
        assert_eq!(res.checked, 0);
        let big = generate_patterns(&Digraph::empty(7).unwrap()).unwrap();
        assert!(matches!(is_two_determined(&big, 8), Err(GameError::TooLarge { .. })));
    }

    #[test]
    fn game_trichotomy() {
        let fair = solve_game(&GameSpec::new(1, 1, build_fair(3).unwrap()).unwrap()).unwrap();
        assert_eq!((fair.value.clone(), fair.class), (Ratio::zero(), GameClass::Fair));

        let cyc = solve_game(&GameSpec::new(1, 1, cycle_model()).unwrap()).unwrap();
        assert_eq!(cyc.value, ratio(-1, 511));
        assert_eq!(cyc.class, GameClass::FavorableToII);
        // Player II answers A = {1} with B = {3}, the out-neighbour of 1.
        assert_eq!(cyc.reply(s(&[1])).unwrap().best_b, s(&[3]));

        let sink = Digraph::new(3, [(1, 3), (2, 3), (1, 2)]).unwrap();
        let rep = solve_game(&GameSpec::new(1, 1, CompetitionModel::Pattern { digraph: sink, symbols: 4 }).unwrap())
            .unwrap();
        assert!(rep.value.is_positive());
        assert_eq!(rep.class, GameClass::UnfavorableToII);
        assert_eq!(rep.optimal_a, s(&[3]));
    }

    #[test]
    fn fair_model_is_fair_for_every_size() {
        for n in 2..=5 {
            for r1 in 1..n {
                for r2 in 1..=n - r1 {
                    let rep = solve_game(&GameSpec::new(r1, r2, build_fair(n).unwrap()).unwrap()).unwrap();
                    assert!(rep.value.is_zero(), "n={n} r1={r1} r2={r2}");
                }
            }
        }
    }

    #[test]
    fn unfavorable_construction() {
        for (n, r1, r2) in [(3, 1, 1), (4, 1, 1), (4, 2, 1), (4, 1, 2)] {
            let rep = solve_game(&build_unfavorable(n, r1, r2).unwrap()).unwrap();
            assert!(rep.value.is_positive(), "n={n} r1={r1} r2={r2}");
            assert!(rep.optimal_a.contains(n));
        }
        // Deviating to A = {1} on [3] is punished.
        let rep = solve_game(&build_unfavorable(3, 1, 1).unwrap()).unwrap();
        assert!(rep.reply(s(&[1])).unwrap().value.is_negative());
    }

    #[test]
    fn favorable_construction() {
        let Favorable::Model { spec, tournament } = build_favorable(1, 1, 3).unwrap() else { panic!() };
        assert_eq!(tournament.n(), 3);
        let rep = solve_game(&spec).unwrap();
        assert_eq!(rep.value, ratio(-1, 511));
        assert_eq!(build_favorable(1, 1, 2).unwrap(), Favorable::Impossible);
        assert_eq!(build_favorable(2, 2, 3).unwrap(), Favorable::Impossible);
        let MinS::Found { n, .. } = min_s_exhaustive(DirectionalParams::new(1, 2).unwrap(), 7).unwrap() else {
            panic!()
        };
        let Favorable::Model { spec, .. } = build_favorable(1, 2, n).unwrap() else { panic!() };
        assert_eq!(solve_game(&spec).unwrap().class, GameClass::FavorableToII);
    }

    #[test]
    fn favorable_beyond_exhaustive_range() {
        let Favorable::Model { spec, tournament } = build_favorable(1, 1, 8).unwrap() else { panic!() };
        assert!(tournament.is_directional(DirectionalParams::new(1, 1).unwrap()).unwrap());
        assert_eq!(solve_game(&spec).unwrap().class, GameClass::FavorableToII);
    }

    #[test]
    fn guards() {
        assert!(matches!(GameSpec::new(2, 2, build_fair(3).unwrap()), Err(GameError::Infeasible { .. })));
        let spec = GameSpec::new(1, 1, build_fair(9).unwrap()).unwrap();
        assert!(matches!(solve_game(&spec), Err(GameError::TooLarge { .. })));
    }

    #[test]
    fn favorability_matches_directionality_on_three_vertices() {
        let p = DirectionalParams::new(1, 1).unwrap();
        for d in Digraph::enumerate_all(3) {
            let model = CompetitionModel::Pattern { digraph: d.clone(), symbols: 4 };
            let rep = solve_game(&GameSpec::new(1, 1, model).unwrap()).unwrap();
            let pats = generate_patterns(&d).unwrap();
            assert!(is_two_determined(&pats, 4).unwrap().holds);
            let directional = ranking_graph(&pats, 4).unwrap().is_directional(p).unwrap();
            assert_eq!(rep.class == GameClass::FavorableToII, directional, "{d:?}");
        }
    }

    #[test]
    fn value_is_monotone_in_set_sizes() {
        let mut models = vec![build_fair(5).unwrap(), cycle_model()];
        for code in [0u64, 5, 17, 42, 63] {
            let t = Tournament::from_code(4, code).unwrap();
            models.push(CompetitionModel::Pattern { digraph: t.into_digraph(), symbols: 5 });
        }
        for d in [Digraph::new(4, [(1, 2), (3, 4)]).unwrap(), Digraph::empty(4).unwrap()] {
            models.push(CompetitionModel::Pattern { digraph: d, symbols: 5 });
        }
        for model in models {
            let n = model.n();
            let value = |r1, r2| solve_game(&GameSpec::new(r1, r2, model.clone()).unwrap()).unwrap().value;
            for r1 in 1..n {
                for r2 in 1..n - r1 {
                    let v = value(r1, r2);
                    assert!(value(r1, r2 + 1) >= v, "{model:?} r1={r1} r2={r2}");
                    assert!(value(r1 + 1, r2) >= v, "{model:?} r1={r1} r2={r2}");
                }
            }
        }
    }

    #[test]
    fn report_json_round_trip() {
        let rep = solve_game(&GameSpec::new(1, 1, cycle_model()).unwrap()).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        assert!(text.contains("\"value\":\"-1/511\""));
        assert!(text.contains("\"class\":\"FavorableToII\""));
        let back: GameReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }

    fn play(spec: &GameSpec, human: Role, seed: u64, input: &str) -> (Result<Transcript>, String) {
        let mut out = Vec::new();
        let t = interactive_play(spec, human, seed, input.as_bytes(), &mut out);
        (t, String::from_utf8(out).unwrap())
    }

    #[test]
    fn interactive_engine_replies_optimally() {
        let spec = GameSpec::new(1, 1, cycle_model()).unwrap();
        let (t, out) = play(&spec, Role::PlayerI, 9, "{1,2}\n{1}\n");
        let t = t.unwrap();
        assert!(out.contains("invalid choice"));
        assert_eq!((t.a, t.b, t.a_prime, t.b_prime), (s(&[1]), s(&[3]), s(&[1]), s(&[3])));
        assert_eq!(Ratio::one() - &t.p_player_one, ratio(256, 511));
        assert!(out.contains("P(win for II) = 256/511"));
        let again = play(&spec, Role::PlayerI, 9, "{1,2}\n{1}\n").0.unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn interactive_rejects_garbage_and_handles_eof() {
        let spec = GameSpec::new(1, 1, cycle_model()).unwrap();
        let (t, out) = play(&spec, Role::PlayerI, 1, "hello\n{7}\n{}\n{2}\n");
        assert_eq!(t.unwrap().a, s(&[2]));
        assert_eq!(out.matches("invalid choice").count(), 3);
        let (t, _) = play(&spec, Role::PlayerI, 1, "{9}\n");
        assert!(matches!(t, Err(GameError::UnexpectedEof)));
    }

    #[test]
    fn interactive_as_player_two() {
        let spec = GameSpec::new(1, 2, build_fair(4).unwrap()).unwrap();
        let (t, out) = play(&spec, Role::PlayerII, 3, "{1}\n{2,3}\n");
        let t = t.unwrap();
        assert!(out.contains("invalid choice"));
        assert_eq!(t.a, s(&[1]));
        assert_eq!(t.b, s(&[2, 3]));
        assert!(t.a_prime.is_subset(t.a) && t.b_prime.is_subset(t.b));
        assert_eq!(t.payoff, if t.winner == Role::PlayerI { t.b_prime.len() as i64 } else { -1 });
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn solved_games_are_consistent(code in 0usize..729, r1 in 1usize..3, r2 in 1usize..3, a_bits in 1u64..16, b_bits in 1u64..16) {
            let d = Digraph::enumerate_all(4).swap_remove(code);
            let model = CompetitionModel::Pattern { digraph: d, symbols: 5 };
            let rep = solve_game(&GameSpec::new(r1, r2, model.clone()).unwrap()).unwrap();
            proptest::prop_assert_eq!(rep.class, GameClass::of(&rep.value));
            let best = rep.reply(rep.optimal_a).unwrap();
            proptest::prop_assert_eq!(&best.value, &rep.value);
            proptest::prop_assert!(rep.tree.iter().all(|r| r.value <= rep.value));
            let a = VertexSet::from_bits(a_bits);
            let b = VertexSet::from_bits(b_bits).difference(a);
            if !b.is_empty() {
                let eval = Evaluator::new(&model).unwrap();
                let total = eval.group_prob(a, b).unwrap() + eval.group_prob(b, a).unwrap();
                proptest::prop_assert_eq!(total, ratio(1, 1));
            }
        }
    }
}
