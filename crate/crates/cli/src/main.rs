use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hitrank::chain::{new_chain, write_trace, ChainError, ChainParams, ChainStream, ReplayColumns};
use hitrank::digraph::{
    bound_s, min_s_exhaustive, search_directional, Digraph, DigraphError, DirectionalParams, MinS, SearchOutcome,
};
use hitrank::exact::{absorbing_oracle, ranking_graph, solve_v, CompetitionReport, ExactError};
use hitrank::game::{build_fair, interactive_play, solve_game, CompetitionModel, GameError, GameSpec, Role};
use hitrank::montecarlo::{estimate_probs, estimate_v, MCConfig, MCError};
use hitrank::pattern::{generate_patterns, Pattern, PatternError, PatternFile};

/// Pattern hitting times, ranking graphs and the set-selection game.
#[derive(Parser)]
#[command(name = "hitrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the patterns generated by a digraph.
    GenPatterns {
        /// Digraph JSON, e.g. {"n": 3, "arcs": [[1,3],[3,2],[2,1]]}.
        #[arg(long)]
        digraph: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-arrival probabilities of a pattern family.
    Compete(CompeteArgs),
    /// Check that the generated patterns rank exactly as the digraph.
    VerifyRanking {
        #[arg(long)]
        digraph: PathBuf,
        /// Alphabet size; defaults to n + 1.
        #[arg(long = "N")]
        symbols: Option<usize>,
    },
    /// Directional tournaments: check, search, union bound, exhaustive minimum.
    Directional(DirectionalArgs),
    /// Solve or play the set-selection game.
    #[command(subcommand)]
    Game(GameCommand),
    /// Dump chain windows as CSV, marking pattern matches.
    Trace {
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long = "N")]
        symbols: Option<usize>,
        #[arg(long, default_value_t = 20)]
        steps: u64,
        #[arg(long, env = "HITRANK_SEED", default_value_t = 0)]
        seed: u64,
        /// JSON array of columns to replay instead of random ones.
        #[arg(long)]
        columns: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Oracle,
    Mc,
}

#[derive(Args)]
struct CompeteArgs {
    /// Pattern file as written by gen-patterns.
    #[arg(long)]
    patterns: PathBuf,
    /// Alphabet size; defaults to n + 1 for generated files, else the largest M.
    #[arg(long = "N")]
    symbols: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    method: Method,
    /// Comma-separated 1-based pattern ids to race, e.g. 1,3.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<usize>>,
    /// Oracle truncation tolerance.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, env = "HITRANK_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Per-trial step cap; defaults to 100·N^(k+1).
    #[arg(long)]
    t_guard: Option<u64>,
    /// Add exact Clopper–Pearson intervals.
    #[arg(long)]
    clopper_pearson: bool,
    /// Also estimate v from one renewal scan of this many steps.
    #[arg(long)]
    v_steps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DirectionalArgs {
    #[command(flatten)]
    mode: DirectionalMode,
    #[arg(long, env = "HITRANK_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: u64,
    #[arg(long, default_value_t = 6)]
    max_n: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DirectionalMode {
    /// Is the tournament in FILE (r1,r2)-directional?
    #[arg(long, num_args = 3, value_names = ["FILE", "R1", "R2"])]
    check: Option<Vec<String>>,
    /// Random search for an (r1,r2)-directional tournament on N vertices.
    #[arg(long, num_args = 3, value_names = ["N", "R1", "R2"])]
    search: Option<Vec<usize>>,
    /// Smallest n at which the union bound certifies existence.
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    bound: Option<Vec<usize>>,
    /// Exhaustive minimum vertex count, up to --max-n.
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    min: Option<Vec<usize>>,
}

#[derive(Args)]
struct ModelArgs {
    /// Pattern model over this digraph.
    #[arg(long, conflicts_with = "fair", required_unless_present = "fair")]
    digraph: Option<PathBuf>,
    /// Symmetric model with this many exchangeable hitting times.
    #[arg(long)]
    fair: Option<usize>,
    /// Alphabet size for pattern models; defaults to n + 1.
    #[arg(long = "N")]
    symbols: Option<usize>,
    #[arg(long)]
    r1: usize,
    #[arg(long)]
    r2: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Player {
    #[value(name = "I")]
    One,
    #[value(name = "II")]
    Two,
}

#[derive(Subcommand)]
enum GameCommand {
    /// Exhaustive minimax solution as JSON.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play one round on the terminal against the engine.
    Play {
        #[command(flatten)]
        model: ModelArgs,
        /// Which side the human takes.
        #[arg(long = "as", value_enum, default_value = "I")]
        human: Player,
        #[arg(long, env = "HITRANK_SEED", default_value_t = 0)]
        seed: u64,
        /// Also write the transcript JSON here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

/// Failure categories and their exit codes.
#[derive(Debug)]
enum Failure {
    /// 1: bad usage or an infeasible request.
    Usage(String),
    /// 2: malformed or invalid input.
    Validation(String),
    /// 3: the exact solver's preconditions fail.
    Hypothesis(String),
    /// 4: recovered ranking graph differs from the input.
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Hypothesis(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Hypothesis(m) | Failure::Mismatch(m) => f.write_str(m),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<DigraphError> for Failure {
    fn from(e: DigraphError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<PatternError> for Failure {
    fn from(e: PatternError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::HypothesisViolated(_) | ExactError::AlphabetTooLarge { .. } => Failure::Hypothesis(e.to_string()),
            ExactError::Pattern(p) => p.into(),
            ExactError::Digraph(d) => d.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::NoTieViolation(..) | ChainError::AlphabetTooLarge { .. } => Failure::Hypothesis(e.to_string()),
            ChainError::GuardExceeded(_) => Failure::Usage(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<MCError> for Failure {
    fn from(e: MCError) -> Self {
        match e {
            MCError::Chain(c) => c.into(),
            MCError::Pattern(p) => p.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        match e {
            GameError::Exact(x) => x.into(),
            GameError::Digraph(d) => d.into(),
            GameError::Pattern(p) => p.into(),
            GameError::Chain(c) => c.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn gen_patterns(digraph: &Path, out: Option<&Path>) -> Outcome {
    let d: Digraph = read_json(digraph)?;
    let patterns = generate_patterns(&d)?;
    emit(out, &pretty(&PatternFile { digraph: Some(d), patterns }))
}

fn default_symbols(file: &PatternFile, pats: &[Pattern]) -> usize {
    match &file.digraph {
        Some(d) => d.n() + 1,
        None => pats.iter().map(Pattern::alphabet).max().unwrap_or(2),
    }
}

fn compete(args: &CompeteArgs) -> Outcome {
    let file: PatternFile = read_json(&args.patterns)?;
    let ids: Vec<usize> = match &args.select {
        Some(ids) => ids.clone(),
        None => (1..=file.patterns.len()).collect(),
    };
    if let Some(&bad) = ids.iter().find(|&&i| i == 0 || i > file.patterns.len()) {
        return Err(Failure::Usage(format!("pattern id {bad} is not in 1..={}", file.patterns.len())));
    }
    let pats: Vec<Pattern> = ids.iter().map(|&i| file.patterns[i - 1].clone()).collect();
    let symbols = args.symbols.unwrap_or_else(|| default_symbols(&file, &pats));
    let mut report = match args.method {
        Method::Exact => CompetitionReport::from_solution(&solve_v(&pats, symbols)?, json!({ "N": symbols })),
        Method::Oracle => absorbing_oracle(&pats, symbols, args.eps)?,
        Method::Mc => {
            let cfg = MCConfig {
                trials: args.trials,
                master_seed: args.seed,
                workers: args.workers.unwrap_or_else(default_workers),
                t_guard: args.t_guard,
                clopper_pearson: args.clopper_pearson,
            };
            let mut est = estimate_probs(&pats, symbols, &cfg)?;
            if let Some(t) = args.v_steps {
                est.v_hat = Some(estimate_v(&pats, symbols, t, args.seed)?);
            }
            let mut rep = est.report(symbols, &cfg);
            if let Some(cp) = &est.clopper_pearson {
                rep.config["clopper_pearson"] = json!(cp);
            }
            rep
        }
    };
    for (entry, &id) in report.entries.iter_mut().zip(&ids) {
        entry.id = id;
    }
    report.config["patterns"] = json!(args.patterns.display().to_string());
    emit(args.out.as_deref(), &pretty(&report))
}

fn verify_ranking(digraph: &Path, symbols: Option<usize>) -> Outcome {
    let d: Digraph = read_json(digraph)?;
    let symbols = symbols.unwrap_or(d.n() + 1);
    let got = ranking_graph(&generate_patterns(&d)?, symbols)?;
    if got.same_arcs(&d) {
        println!("ranking graph matches: {} vertices, {} arcs, N = {symbols}", d.n(), d.arcs().len());
        return Ok(());
    }
    let mut diff = Vec::new();
    for &(i, j) in &d.sorted_arcs() {
        if !got.has_arc(i, j) {
            diff.push(format!("- ({i},{j})"));
        }
    }
    for &(i, j) in &got.sorted_arcs() {
        if !d.has_arc(i, j) {
            diff.push(format!("+ ({i},{j})"));
        }
    }
    Err(Failure::Mismatch(format!("ranking graph differs from input:\n{}", diff.join("\n"))))
}

fn params(r1: usize, r2: usize) -> Result<DirectionalParams, Failure> {
    DirectionalParams::new(r1, r2).map_err(|e| Failure::Usage(e.to_string()))
}

fn directional(args: &DirectionalArgs) -> Outcome {
    let (mode, opts) = (&args.mode, args);
    if let Some(v) = &mode.check {
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Failure::Usage(format!("not a positive integer: {s}")));
        let d: Digraph = read_json(Path::new(&v[0]))?;
        let p = params(parse(&v[1])?, parse(&v[2])?)?;
        println!("{}", d.is_directional(p).map_err(|e| Failure::Usage(e.to_string()))?);
    } else if let Some(v) = &mode.search {
        let p = params(v[1], v[2])?;
        match search_directional(v[0], p, opts.seed, opts.max_iters).map_err(|e| Failure::Usage(e.to_string()))? {
            SearchOutcome::Found { tournament, iterations } => {
                eprintln!("found after {iterations} sample(s)");
                println!("{}", serde_json::to_string(&tournament).expect("serializable"));
            }
            SearchOutcome::NotFound { iterations } => {
                return Err(Failure::Usage(format!("no directional tournament in {iterations} samples")));
            }
        }
    } else if let Some(v) = &mode.bound {
        println!("{}", bound_s(params(v[0], v[1])?));
    } else if let Some(v) = &mode.min {
        match min_s_exhaustive(params(v[0], v[1])?, opts.max_n).map_err(|e| Failure::Usage(e.to_string()))? {
            MinS::Found { n, witness } => {
                println!("{n}");
                eprintln!("witness: {}", serde_json::to_string(&witness).expect("serializable"));
            }
            MinS::Unknown { n_max } => println!("unknown: none on up to {n_max} vertices"),
        }
    }
    Ok(())
}

fn game_spec(m: &ModelArgs) -> Result<(GameSpec, Value), Failure> {
    let (model, config) = match (&m.digraph, m.fair) {
        (Some(path), _) => {
            let d: Digraph = read_json(path)?;
            let symbols = m.symbols.unwrap_or(d.n() + 1);
            let config = json!({ "digraph": path.display().to_string(), "N": symbols });
            (CompetitionModel::Pattern { digraph: d, symbols }, config)
        }
        (None, Some(n)) => (build_fair(n)?, json!({ "fair": n })),
        (None, None) => return Err(Failure::Usage("pass --digraph or --fair".into())),
    };
    let mut config = config;
    config["r1"] = json!(m.r1);
    config["r2"] = json!(m.r2);
    Ok((GameSpec::new(m.r1, m.r2, model)?, config))
}

fn game(cmd: &GameCommand) -> Outcome {
    match cmd {
        GameCommand::Analyze { model, out } => {
            let (spec, config) = game_spec(model)?;
            let report = solve_game(&spec)?;
            let mut value = serde_json::to_value(&report).expect("serializable");
            value["config"] = config;
            emit(out.as_deref(), &pretty(&value))
        }
        GameCommand::Play { model, human, seed, transcript } => {
            let (spec, _) = game_spec(model)?;
            let role = match human {
                Player::One => Role::PlayerI,
                Player::Two => Role::PlayerII,
            };
            let stdin = io::stdin();
            let t = interactive_play(&spec, role, *seed, stdin.lock(), io::stdout().lock())?;
            if let Some(path) = transcript {
                fs::write(path, format!("{}\n", pretty(&t)))?;
            }
            Ok(())
        }
    }
}

fn trace(
    patterns: &Path,
    symbols: Option<usize>,
    steps: u64,
    seed: u64,
    columns: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let file: PatternFile = read_json(patterns)?;
    let pats = file.patterns.clone();
    let first = pats.first().ok_or_else(|| Failure::Validation("pattern file is empty".into()))?;
    let k = first.rows();
    let symbols = symbols.unwrap_or_else(|| default_symbols(&file, &pats));
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(fs::File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match columns {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let source = ReplayColumns::from_json(symbols, k, &text)?;
            let mut stream = ChainStream::with_source(symbols, k, source)?;
            write_trace(&mut stream, &pats, steps, &mut sink)?;
        }
        None => {
            let params = ChainParams::new(symbols, k, seed)?;
            write_trace(&mut new_chain(params), &pats, steps, &mut sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenPatterns { digraph, out } => gen_patterns(&digraph, out.as_deref()),
        Command::Compete(args) => compete(&args),
        Command::VerifyRanking { digraph, symbols } => verify_ranking(&digraph, symbols),
        Command::Directional(args) => directional(&args),
        Command::Game(cmd) => game(&cmd),
        Command::Trace { patterns, symbols, steps, seed, columns, out } => {
            trace(&patterns, symbols, steps, seed, columns.as_deref(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
