//! `qmip`: instance generation, protocol simulation and commuting-projector
//! sweeps. All output is JSON or CSV on stdout.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qmip_core::commuting::{delta_sweep, sweep_csv, SweepGenerator};
use qmip_core::gap3dm::{exact_gap, generate_negative, generate_positive, optimal_matchings, Gap3DMInstance, Matching, MAX_EXACT_N};
use qmip_core::protocol::{accept_probability, sample_round, AcceptanceReport, ProtocolVariant};
use qmip_core::provers::{honest, mixed_honest, perturbed, random_strategy, ProverStrategy};
use qmip_core::rng::child_seed;
use qmip_core::Error;

#[derive(Parser)]
#[command(name = "qmip", version, about = "Exact simulator of a two-prover quantum proof for gap-3DM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a positive or negative instance.
    Gen(GenArgs),
    /// Exact matching value of an instance and optimal bijection pairs.
    Gap(GapArgs),
    /// Exact acceptance probabilities of a prover strategy.
    Simulate(SimulateArgs),
    /// Monte Carlo protocol rounds.
    Sample(SampleArgs),
    /// Successive-diagonalization sweep over a projector family generator.
    Commuting(CommutingArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Plant a perfect matching among decoy triples.
    #[arg(long, conflicts_with = "negative", required_unless_present = "negative")]
    positive: bool,
    /// Reject random instances until the matching value is at most --gap.
    #[arg(long)]
    negative: bool,
    #[arg(short = 'n', long, value_parser = clap::value_parser!(u64).range(2..=64))]
    n: u64,
    /// Degree bound on both neighbor sets.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    delta: u64,
    /// Extra triples beside the planted matching (positive only).
    #[arg(long, default_value_t = 0)]
    decoys: usize,
    /// Target matching value (negative only).
    #[arg(long, default_value_t = 0.75)]
    gap: f64,
    #[arg(long, default_value_t = 100_000)]
    max_attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the instance here in text form.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    instance: PathBuf,
    /// Number of optimal bijection pairs to list.
    #[arg(long, default_value_t = 1)]
    witnesses: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ZeroError,
    Modified,
}

impl From<VariantArg> for ProtocolVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::ZeroError => ProtocolVariant::ZeroError,
            VariantArg::Modified => ProtocolVariant::Modified,
        }
    }
}

#[derive(Args)]
struct StrategyArgs {
    /// Instance file (text or JSON).
    instance: PathBuf,
    /// honest | mixed:K | perturbed:EPS | random:D
    #[arg(long, default_value = "honest")]
    strategy: String,
    /// Load the strategy from JSON instead of --strategy.
    #[arg(long, conflicts_with = "strategy")]
    strategy_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::ZeroError)]
    variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: StrategyArgs,
    /// Repeat over this many derived seeds and report mean/min/max.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Also sample this many rounds.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    /// Write the (single-seed) strategy as JSON.
    #[arg(long)]
    save_strategy: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: StrategyArgs,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    /// Include the first K transcripts in the output.
    #[arg(long, default_value_t = 0)]
    show: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Conjugated,
    Regev,
}

#[derive(Args)]
struct CommutingArgs {
    #[arg(long = "gen", value_enum, default_value_t = GenKind::Conjugated)]
    generator: GenKind,
    /// Number of projectors (conjugated).
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Matrix dimension (conjugated).
    #[arg(long, default_value_t = 32)]
    d: usize,
    /// Prime grid side (regev).
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Number of lines (regev); defaults to p^2.
    #[arg(long)]
    lines: Option<usize>,
    /// Comma-separated eps grid.
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    eps: Vec<f64>,
    /// Seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) | Error::AttemptsExhausted { .. } | Error::BoundViolated(_) => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> CliResult<Gap3DMInstance> {
    Ok(Gap3DMInstance::parse(&read_file(path)?)?)
}

fn matching_json(m: &Matching) -> Value {
    json!({ "pi": m.pi(), "sigma": m.sigma() })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn cmd_gen(a: GenArgs) -> CliResult<String> {
    let (n, delta) = (a.n as usize, a.delta as usize);
    let (inst, planted) = if a.positive {
        let (inst, m) = generate_positive(n, delta, a.decoys, a.seed)?;
        (inst, Some(m))
    } else {
        if !(0.0..=1.0).contains(&a.gap) {
            return Err(CliError::Usage(format!("--gap must lie in [0, 1], got {}", a.gap)));
        }
        (generate_negative(n, delta, a.gap, a.seed, a.max_attempts)?, None)
    };
    if let Some(path) = &a.out {
        write_file(path, &inst.to_text())?;
    }
    let gap = if n <= MAX_EXACT_N { Some(exact_gap(&inst)?) } else { None };
    let instance: Value = serde_json::from_str(&inst.to_json()).expect("instance json");
    Ok(pretty(&json!({
        "kind": if a.positive { "positive" } else { "negative" },
        "seed": a.seed,
        "out": a.out.as_ref().map(|p| p.display().to_string()),
        "instance_hash": inst.content_hash(),
        "instance": instance,
        "planted": planted.as_ref().map(matching_json),
        "exact_gap": gap,
    })))
}

fn cmd_gap(a: GapArgs) -> CliResult<String> {
    let inst = load_instance(&a.instance)?;
    let (value, ms) = optimal_matchings(&inst, a.witnesses)?;
    Ok(pretty(&json!({
        "instance_hash": inst.content_hash(),
        "n": inst.n(),
        "delta": inst.delta(),
        "triples": inst.triples().len(),
        "exact_gap": value,
        "witnesses": ms.iter().map(matching_json).collect::<Vec<_>>(),
    })))
}

/// Builds the strategy named by `desc`; seeded kinds use `seed`.
fn build_strategy(inst: &Gap3DMInstance, desc: &str, seed: u64) -> CliResult<ProverStrategy> {
    let (kind, param) = desc.split_once(':').unwrap_or((desc, ""));
    let bad = |what: &str| CliError::Usage(format!("strategy '{desc}': {what}"));
    let optimal = |k: usize| -> CliResult<Vec<Matching>> {
        if inst.n() > MAX_EXACT_N {
            return Err(CliError::Validation(format!(
                "optimal matchings need n <= {MAX_EXACT_N}, instance has n = {}",
                inst.n()
            )));
        }
        Ok(optimal_matchings(inst, k)?.1)
    };
    Ok(match kind {
        "honest" if param.is_empty() => honest(inst, &optimal(1)?[0])?,
        "mixed" => {
            let k: usize = param.parse().map_err(|_| bad("expected mixed:K"))?;
            if k == 0 {
                return Err(bad("K must be positive"));
            }
            let ms = optimal(k)?;
            let w = vec![1.0 / (ms.len() as f64).sqrt(); ms.len()];
            mixed_honest(inst, &ms, &w)?
        }
        "perturbed" => {
            let eps: f64 = param.parse().map_err(|_| bad("expected perturbed:EPS"))?;
            perturbed(&honest(inst, &optimal(1)?[0])?, eps, seed)?
        }
        "random" => {
            let d: usize = param.parse().map_err(|_| bad("expected random:D"))?;
            random_strategy(inst.n(), d, seed)?
        }
        _ => return Err(bad("unknown kind; use honest, mixed:K, perturbed:EPS or random:D")),
    })
}

fn strategy_for(c: &StrategyArgs, inst: &Gap3DMInstance, seed: u64) -> CliResult<ProverStrategy> {
    match &c.strategy_file {
        Some(path) => Ok(ProverStrategy::from_json(&read_file(path)?)?),
        None => build_strategy(inst, &c.strategy, seed),
    }
}

fn sampled(inst: &Gap3DMInstance, s: &ProverStrategy, v: ProtocolVariant, seed: u64, rounds: u64) -> CliResult<(u64, Vec<qmip_core::protocol::Transcript>)> {
    let mut accepted = 0;
    let mut log = Vec::new();
    for k in 0..rounds {
        let t = sample_round(inst, s, v, child_seed(seed, k))?;
        accepted += u64::from(t.accepted);
        log.push(t);
    }
    Ok((accepted, log))
}

fn sample_summary(exact: f64, accepted: u64, rounds: u64) -> Value {
    let emp = accepted as f64 / rounds as f64;
    let se = (exact * (1.0 - exact) / rounds as f64).sqrt();
    json!({
        "rounds": rounds,
        "accepted": accepted,
        "empirical": emp,
        "exact": exact,
        "std_err": se,
        "z": if se > 0.0 { (emp - exact) / se } else { 0.0 },
    })
}

fn stats(values: &[f64]) -> Value {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "mean": mean, "min": min, "max": max })
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<String> {
    let c = &a.common;
    let inst = load_instance(&c.instance)?;
    let variant = ProtocolVariant::from(c.variant);
    if a.seeds == 1 {
        let s = strategy_for(c, &inst, c.seed)?;
        if let Some(path) = &a.save_strategy {
            write_file(path, &s.to_json())?;
        }
        let mut report = accept_probability(&inst, &s, variant)?;
        report.metadata.seed = Some(c.seed);
        let mut out = serde_json::to_value(&report).expect("report json");
        out["strategy"] = json!(c.strategy_file.as_ref().map_or(c.strategy.clone(), |p| p.display().to_string()));
        if a.trials > 0 {
            let (acc, _) = sampled(&inst, &s, variant, c.seed, a.trials)?;
            out["sampled"] = sample_summary(report.overall, acc, a.trials);
        }
        return Ok(pretty(&out));
    }
    if a.save_strategy.is_some() || a.trials > 0 {
        return Err(CliError::Usage("--save-strategy and --trials need --seeds 1".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|k| child_seed(c.seed, k)).collect();
    let reports = seeds
        .iter()
        .map(|&s| accept_probability(&inst, &strategy_for(c, &inst, s)?, variant).map_err(CliError::from))
        .collect::<CliResult<Vec<AcceptanceReport>>>()?;
    let col = |f: fn(&AcceptanceReport) -> f64| stats(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(pretty(&json!({
        "instance_hash": inst.content_hash(),
        "strategy": c.strategy,
        "variant": variant,
        "base_seed": c.seed,
        "seeds": seeds,
        "overall": col(|r| r.overall),
        "p_test1a": col(|r| r.p_test1a),
        "p_test1b": col(|r| r.p_test1b),
        "p_test1c": col(|r| r.p_test1c),
        "p_test2": col(|r| r.p_test2),
        "per_seed": reports.iter().map(|r| r.overall).collect::<Vec<_>>(),
    })))
}

fn cmd_sample(a: SampleArgs) -> CliResult<String> {
    let c = &a.common;
    let inst = load_instance(&c.instance)?;
    let variant = ProtocolVariant::from(c.variant);
    let s = strategy_for(c, &inst, c.seed)?;
    let exact = accept_probability(&inst, &s, variant)?.overall;
    let (acc, log) = sampled(&inst, &s, variant, c.seed, a.rounds)?;
    let mut out = sample_summary(exact, acc, a.rounds);
    out["variant"] = json!(variant);
    out["seed"] = json!(c.seed);
    if a.show > 0 {
        out["transcripts"] = serde_json::to_value(&log[..a.show.min(log.len())]).expect("transcript json");
    }
    Ok(pretty(&out))
}

fn cmd_commuting(a: CommutingArgs) -> CliResult<String> {
    if a.eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(CliError::Usage("--eps values must be finite and >= 0".into()));
    }
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let generator = match a.generator {
        GenKind::Conjugated => SweepGenerator::Conjugated { m: a.m, d: a.d },
        GenKind::Regev => SweepGenerator::Regev {
            p: a.p,
            num_lines: a.lines.unwrap_or(a.p * a.p),
        },
    };
    let seeds: Vec<u64> = (0..a.seeds).map(|k| a.seed.wrapping_add(k)).collect();
    let rows = delta_sweep(&generator, &a.eps, &seeds)?;
    Ok(sweep_csv(&generator, &rows))
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("GAMES_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GAMES_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<String> {
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Commuting(a) => cmd_commuting(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
