//! Seeded, parallel Monte Carlo over the chain.
//!
//! Trial `i` always draws its columns from `child_seed(master_seed, i)`, and
//! worker results are merged by integer summation, so every estimate is a
//! pure function of its inputs and configuration whatever the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::chain::{check_competition, new_chain, race, renewal_scan, ChainError, ChainParams, RenewalScan};
use crate::digraph::Digraph;
use crate::exact::{marginal_distribution_f64, CompetitionReport, Method, ReportEntry};
use crate::pattern::{generate_patterns, Pattern, PatternError};

#[derive(Debug, Error)]
pub enum MCError {
    #[error("trials must be at least {min}, got {got}")]
    TooFewTrials { min: u64, got: u64 },
    #[error("t_guard must be at least 2, got {0}")]
    GuardTooSmall(u64),
    #[error("t_max = {got} is below 10·N^(k+1) = {min}")]
    HorizonTooShort { min: u64, got: u64 },
    #[error("lag must be 1 or 2, got {0}")]
    BadLag(u64),
    #[error("need at least one pattern")]
    NoPatterns,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

type Result<T> = std::result::Result<T, MCError>;

/// Decorrelated per-trial seed (two rounds of SplitMix64 finalization).
pub fn child_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ index)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCConfig {
    pub trials: u64,
    pub master_seed: u64,
    /// 0 selects the available parallelism.
    pub workers: usize,
    /// Per-trial step cap; `None` means `100·N^{k+1}`.
    pub t_guard: Option<u64>,
    pub clopper_pearson: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig { trials: 100_000, master_seed: 0, workers: 0, t_guard: None, clopper_pearson: false }
    }
}

/// `100·N^{k+1}`, saturating.
pub fn default_guard(symbols: usize, rows: usize) -> u64 {
    (symbols as u64).saturating_pow(rows as u32 + 1).saturating_mul(100)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MCError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

const BLOCK: u64 = 1 << 12;

/// Runs `trials` independent jobs in fixed-size blocks and sums their
/// integer tallies.
fn tally<F>(trials: u64, workers: usize, width: usize, job: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut [u64]) -> std::result::Result<(), ChainError> + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let sums = with_pool(workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![0u64; width];
                for i in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                    job(i, &mut acc)?;
                }
                Ok::<_, ChainError>(acc)
            })
            .try_reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    })?;
    Ok(sums?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub trials: u64,
    /// Trials that produced a winner; the denominator of `p_hat`.
    pub completed: u64,
    pub guard_hits: u64,
    pub wins: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub ci95: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clopper_pearson: Option<Vec<(f64, f64)>>,
    pub total_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_hat: Option<VEstimate>,
}

impl MCEstimate {
    pub fn report(&self, symbols: usize, cfg: &MCConfig) -> CompetitionReport {
        let entries = (0..self.wins.len())
            .map(|i| ReportEntry {
                id: i + 1,
                p: self.p_hat[i],
                wins: Some(self.wins[i]),
                ci95: Some(self.ci95[i]),
                v: self.v_hat.as_ref().map(|v| v.v_hat[i]),
                ..ReportEntry::default()
            })
            .collect();
        CompetitionReport {
            method: Method::MonteCarlo,
            entries,
            uncertainty: self.ci95.iter().copied().fold(0.0, f64::max),
            config: serde_json::json!({
                "N": symbols,
                "seed": cfg.master_seed,
                "trials": cfg.trials,
                "workers": cfg.workers,
                "t_guard": cfg.t_guard,
                "completed": self.completed,
                "guard_hits": self.guard_hits,
                "total_steps": self.total_steps,
            }),
        }
    }
}

/// Exact 95% interval for `x` successes in `n` trials.
pub fn clopper_pearson(x: u64, n: u64) -> (f64, f64) {
    let alpha = 0.05;
    let lo = if x == 0 {
        0.0
    } else {
        Beta::new(x as f64, (n - x + 1) as f64).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if x == n {
        1.0
    } else {
        Beta::new((x + 1) as f64, (n - x) as f64).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

pub fn estimate_probs(patterns: &[Pattern], symbols: usize, cfg: &MCConfig) -> Result<MCEstimate> {
    if cfg.trials == 0 {
        return Err(MCError::TooFewTrials { min: 1, got: 0 });
    }
    let first = patterns.first().ok_or(MCError::NoPatterns)?;
    let k = first.rows();
    ChainParams::new(symbols, k, 0)?;
    check_competition(patterns, k, symbols)?;
    let guard = cfg.t_guard.unwrap_or_else(|| default_guard(symbols, k));
    if guard < 2 {
        return Err(MCError::GuardTooSmall(guard));
    }
    let l = patterns.len();
    // Layout: wins[0..l], guard hits, steps.
    let sums = tally(cfg.trials, cfg.workers, l + 2, |i, acc| {
        let mut stream = new_chain(ChainParams { symbols, rows: k, seed: child_seed(cfg.master_seed, i) });
        match race(&mut stream, patterns, Some(guard)) {
            Ok(out) => {
                acc[out.winner] += 1;
                acc[l + 1] += out.time + 1;
            }
            Err(ChainError::GuardExceeded(n)) => {
                acc[l] += 1;
                acc[l + 1] += n;
            }
            Err(e) => return Err(e),
        }
        Ok(())
    })?;
    let wins = sums[..l].to_vec();
    let guard_hits = sums[l];
    let completed = cfg.trials - guard_hits;
    let n = completed.max(1) as f64;
    let p_hat: Vec<f64> = wins.iter().map(|&w| w as f64 / n).collect();
    let se: Vec<f64> = p_hat.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    let ci95 = se.iter().map(|s| 1.96 * s).collect();
    let clopper_pearson = (cfg.clopper_pearson && completed > 0)
        .then(|| wins.iter().map(|&w| clopper_pearson(w, completed)).collect());
    Ok(MCEstimate {
        trials: cfg.trials,
        completed,
        guard_hits,
        wins,
        p_hat,
        se,
        ci95,
        clopper_pearson,
        total_steps: sums[l + 1],
        v_hat: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VEstimate {
    pub t_max: u64,
    pub v_hat: Vec<f64>,
    /// Poisson-count standard error `N^{k+1}·sqrt(V)/t`.
    pub se: Vec<f64>,
    pub renewal_matches: Vec<u64>,
    pub matches: Vec<u64>,
}

impl VEstimate {
    /// `v̂ / Σ v̂`.
    pub fn p_from_v(&self) -> Vec<f64> {
        let total: f64 = self.v_hat.iter().sum();
        self.v_hat.iter().map(|v| v / total).collect()
    }
}

/// `v̂_i = V_{i,t}·N^{k+1}/t` from one scan of length `t_max`.
pub fn estimate_v(patterns: &[Pattern], symbols: usize, t_max: u64, seed: u64) -> Result<VEstimate> {
    Ok(estimate_v_with_scan(patterns, symbols, t_max, seed)?.0)
}

/// [`estimate_v`] that also hands back the underlying scan.
pub fn estimate_v_with_scan(
    patterns: &[Pattern],
    symbols: usize,
    t_max: u64,
    seed: u64,
) -> Result<(VEstimate, RenewalScan)> {
    let k = patterns.first().ok_or(MCError::NoPatterns)?.rows();
    let scale = (symbols as u64).saturating_pow(k as u32 + 1);
    let min = scale.saturating_mul(10);
    if t_max < min {
        return Err(MCError::HorizonTooShort { min, got: t_max });
    }
    let mut stream = new_chain(ChainParams::new(symbols, k, seed)?);
    let scan = renewal_scan(&mut stream, patterns, t_max)?;
    let factor = scale as f64 / t_max as f64;
    let est = VEstimate {
        t_max,
        v_hat: scan.renewal_matches.iter().map(|&v| v as f64 * factor).collect(),
        se: scan.renewal_matches.iter().map(|&v| (v as f64).sqrt() * factor).collect(),
        renewal_matches: scan.renewal_matches.clone(),
        matches: scan.matches.clone(),
    };
    Ok((est, scan))
}

fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).expect("positive dof").sf(stat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub trials: u64,
    /// `[start, end)` per bin; the last bin is open-ended.
    pub bins: Vec<(u64, Option<u64>)>,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub w0_frequency: f64,
    pub w0_expected: f64,
    pub w0_se: f64,
}

/// A pattern with column 1 all ones and hump 2 on the first row; it cannot
/// follow itself, so its hitting time has the recursion law.
pub fn reference_pattern(rows: usize) -> Pattern {
    let mut cells = vec![[1usize, 0]; rows];
    cells[0][1] = 2;
    Pattern::new(2, &cells).expect("valid reference pattern")
}

/// Hitting times of `pattern` over `trials` independent chains.
pub fn sample_hitting_times(
    pattern: &Pattern,
    symbols: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<u64>> {
    let k = pattern.rows();
    ChainParams::new(symbols, k, 0)?;
    check_competition(std::slice::from_ref(pattern), k, symbols)?;
    let times = with_pool(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut s = new_chain(ChainParams { symbols, rows: k, seed: child_seed(seed, i) });
                race(&mut s, std::slice::from_ref(pattern), None).map(|o| o.time)
            })
            .collect::<std::result::Result<Vec<u64>, ChainError>>()
    })?;
    Ok(times?)
}

/// Chi-square goodness of fit of simulated single-pattern hitting times
/// against the recursion law.
pub fn distribution_check(symbols: usize, rows: usize, trials: u64, seed: u64) -> Result<GofReport> {
    if trials < 10_000 {
        return Err(MCError::TooFewTrials { min: 10_000, got: trials });
    }
    let times = sample_hitting_times(&reference_pattern(rows), symbols, trials, seed, 0)?;
    let q = (symbols as f64).powi(-(rows as i32 + 1));
    // Enough support that the uncovered tail is far below one expected count.
    let mut horizon = 16;
    while crate::exact::geometric_tail_bound(symbols, rows, horizon) * trials as f64 > 1e-3 {
        horizon *= 2;
    }
    let law = marginal_distribution_f64(symbols, rows, horizon as usize);
    let n = trials as f64;
    let target = (1.0 / 40.0f64).max(20.0 / n);
    let mut bins = Vec::new();
    let mut expected = Vec::new();
    let mut start = 0u64;
    let mut acc = 0.0;
    let mut cumulative = 0.0;
    for (t, &w) in law.w.iter().enumerate() {
        acc += w;
        cumulative += w;
        if acc >= target && 1.0 - cumulative >= target {
            bins.push((start, Some(t as u64 + 1)));
            expected.push(acc * n);
            start = t as u64 + 1;
            acc = 0.0;
        }
    }
    bins.push((start, None));
    expected.push((1.0 - cumulative + acc) * n);
    let mut observed = vec![0u64; bins.len()];
    for &t in &times {
        let b = bins.partition_point(|&(s, _)| s <= t) - 1;
        observed[b] += 1;
    }
    let chi_square = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = bins.len() - 1;
    let w0 = times.iter().filter(|&&t| t == 0).count() as f64 / n;
    Ok(GofReport {
        trials,
        bins,
        observed,
        expected,
        chi_square,
        dof,
        p_value: chi_square_sf(chi_square, dof),
        w0_frequency: w0,
        w0_expected: q,
        w0_se: (q * (1.0 - q) / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// `Q_KS(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value. For
/// discrete data the p-value is conservative.
pub fn ks_two_sample(a: &[u64], b: &[u64]) -> KsReport {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let ne = (n1 * n2 / (n1 + n2)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    KsReport { statistic: d, p_value: kolmogorov_sf(lambda), n1: a.len(), n2: b.len() }
}

/// KS comparison of the hitting times of patterns `first` and `second`
/// (1-based) generated from `d`, on independent chains.
pub fn identical_law_check(
    d: &Digraph,
    symbols: usize,
    first: usize,
    second: usize,
    trials: u64,
    seed: u64,
) -> Result<KsReport> {
    let pats = generate_patterns(d)?;
    let a = sample_hitting_times(&pats[first - 1], symbols, trials, seed, 0)?;
    let b = sample_hitting_times(&pats[second - 1], symbols, trials, child_seed(seed, u64::MAX), 0)?;
    Ok(ks_two_sample(&a, &b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub samples: u64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Per-row statistics (uniformity) or empty (independence).
    pub per_cell: Vec<f64>,
}

/// Pearson test that every row of `U_m` is uniform on `[N]`, pooled over
/// the `k` independent rows.
pub fn uniformity_check(symbols: usize, rows: usize, steps: u64, seed: u64) -> Result<ChiReport> {
    let mut stream = new_chain(ChainParams::new(symbols, rows, seed)?);
    let mut counts = vec![vec![0u64; symbols]; rows];
    for step in 0..steps {
        for (r, &x) in stream.window().u.iter().enumerate() {
            counts[r][x as usize - 1] += 1;
        }
        if step + 1 < steps {
            stream.advance()?;
        }
    }
    let e = steps as f64 / symbols as f64;
    let per_cell: Vec<f64> = counts
        .iter()
        .map(|row| row.iter().map(|&o| (o as f64 - e).powi(2) / e).sum())
        .collect();
    let chi_square = per_cell.iter().sum();
    let dof = rows * (symbols - 1);
    Ok(ChiReport { samples: steps, chi_square, dof, p_value: chi_square_sf(chi_square, dof), per_cell })
}

/// Contingency test between the first-row entry of `v` in `X_m` and the
/// first-row entry of `u` in `X_{m+lag}`, sampled at `m ≡ 0 (mod 4)` so
/// the pairs are independent of each other. At lag 2 these entries come
/// from different columns and must be independent; at lag 1 they are the
/// same column entry.
pub fn lag_independence_check(symbols: usize, rows: usize, steps: u64, lag: u64, seed: u64) -> Result<ChiReport> {
    if !(1..=2).contains(&lag) {
        return Err(MCError::BadLag(lag));
    }
    let mut stream = new_chain(ChainParams::new(symbols, rows, seed)?);
    let mut table = vec![vec![0u64; symbols]; symbols];
    let mut samples = 0u64;
    let mut pending: Option<usize> = None;
    for step in 0..steps {
        let m = stream.time();
        let w = stream.window();
        if m.is_multiple_of(4) {
            pending = Some(w.v[0] as usize - 1);
        } else if m % 4 == lag {
            if let Some(a) = pending.take() {
                table[a][w.u[0] as usize - 1] += 1;
                samples += 1;
            }
        }
        if step + 1 < steps {
            stream.advance()?;
        }
    }
    let n = samples as f64;
    let rows_sum: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols_sum: Vec<f64> = (0..symbols).map(|c| table.iter().map(|r| r[c]).sum::<u64>() as f64).collect();
    let mut chi_square = 0.0;
    for (a, row) in table.iter().enumerate() {
        for (b, &o) in row.iter().enumerate() {
            let e = rows_sum[a] * cols_sum[b] / n;
            if e > 0.0 {
                chi_square += (o as f64 - e).powi(2) / e;
            }
        }
    }
    let dof = (symbols - 1) * (symbols - 1);
    Ok(ChiReport { samples, chi_square, dof, p_value: chi_square_sf(chi_square, dof), per_cell: Vec::new() })
}
