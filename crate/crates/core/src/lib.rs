//! Pattern hitting times on 1-dependent uniform chains.
//!
//! Given a digraph on `[n]` (no loops, no 2-cycles) this crate builds `n`
//! patterns whose hitting times on the two-column chain `X^{(N,k)}` are
//! identically distributed, yet whose pairwise first-arrival ordering
//! reproduces the digraph exactly. Around that construction sit exact
//! solvers for first-arrival probabilities, an independent window-level
//! dynamic-programming oracle, a reproducible Monte Carlo engine, and the
//! set-selection game `G_{r1,r2}` played on those hitting times.
//!
//! Vertices, pattern ids and pattern rows are 1-based in every public
//! surface.

pub mod chain;
pub mod digraph;
pub mod exact;
pub mod game;
pub mod montecarlo;
pub mod pattern;
pub mod rational;

pub use chain::{ChainParams, ChainStream, Window};
pub use digraph::{DirectionalParams, Digraph, Tournament, VertexSet};
pub use exact::{CompetitionReport, HittingDistribution, VSolution};
pub use game::{CompetitionModel, GameReport, GameSpec};
pub use montecarlo::{MCConfig, MCEstimate};
pub use pattern::{Overlap, Pattern};
