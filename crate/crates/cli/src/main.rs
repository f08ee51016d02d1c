//! `furl` command-line frontend.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use furl::counts::format_estimate;
use furl::estimator::{Counting, Estimator, EstimatorConfig, Variant};
use furl::eval::probe::{
    build_probe_stream, concentration_threshold, probe_expectation, probe_variance, ProbeOutcome,
    ProbeStream,
};
use furl::eval::{memory_for_xi, run_trials, truth_for, write_reports, TrialReport};
use furl::oracle::{degrees, exact_local_binary, exact_local_simple, exact_local_weighted};
use furl::stream::{
    preprocess_multi, preprocess_simple, shuffle_stream, write_edge_list, Edge, NodeInterner,
    RawStream, StreamStats,
};
use furl::synth::{bundled_pa_graph, bundled_pa_multigraph};

#[derive(Parser)]
#[command(
    name = "furl",
    version,
    about = "Fixed-memory local triangle counting over edge streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean an edge list: drop self-loops, canonicalize, optionally dedupe.
    Preprocess(PreprocessArgs),
    /// Stream a file once through an estimator and print `node,estimate`.
    Estimate(RunArgs),
    /// Exact local triangle counts.
    Exact(ExactArgs),
    /// Run several seeded trials and report MRE per trial plus the mean.
    Evaluate(EvaluateArgs),
    /// Evaluate over a grid of memory proportions and decaying factors.
    Sweep(SweepArgs),
    /// Per-node `node,degree,estimate` rows for anomaly plots.
    Scatter(RunArgs),
    /// Monte-Carlo probes of a single triangle, or the concentration threshold.
    Probe(ProbeArgs),
    /// Write a bundled synthetic dataset as an edge list.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input edge list (`u v` per line); stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Randomly permute the stream (seeded by --seed) before processing.
    #[arg(long)]
    shuffle: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Buffer size M.
    #[arg(long, conflicts_with = "xi")]
    memory: Option<usize>,
    /// Memory proportion ξ; M = ⌈ξ·m⌉ (simple) or ⌈ξ·u⌉ (multigraph).
    #[arg(long)]
    xi: Option<f64>,
    /// Bucket size J (default: M).
    #[arg(long)]
    bucket: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    /// Edge sampling probability of the Bernoulli baseline.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    hash_seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PreprocessMode {
    Simple,
    Multi,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum, default_value_t = PreprocessMode::Simple)]
    mode: PreprocessMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactMode {
    Simple,
    Binary,
    Weighted,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum, default_value_t = ExactMode::Simple)]
    mode: ExactMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Comma-separated memory proportions.
    #[arg(long, value_delimiter = ',', required = true)]
    xis: Vec<f64>,
    /// Comma-separated decaying factors.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.7")]
    deltas: Vec<f64>,
    /// Bucket size J (default: the resolved M of each ξ).
    #[arg(long)]
    bucket: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    hash_seed: u64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    Expectation,
    Variance,
    Threshold,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(value_enum)]
    kind: ProbeKind,
    /// Estimator variant (expectation and variance probes).
    #[arg(long, value_parser = parse_variant, default_value = "furl-sx")]
    variant: Variant,
    #[arg(long)]
    memory: usize,
    #[arg(long)]
    bucket: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    hash_seed: u64,
    /// Bucket in which the probe triangle closes (generated stream).
    #[arg(long, default_value_t = 1)]
    formation_bucket: u64,
    /// Bucket at whose end the estimate is read (generated stream).
    #[arg(long, default_value_t = 1)]
    query_bucket: u64,
    /// Use this edge list instead of a generated probe stream.
    #[arg(long, requires = "triangle")]
    input: Option<PathBuf>,
    /// Probed triangle as three comma-separated node tokens.
    #[arg(long, value_delimiter = ',', requires = "input")]
    triangle: Vec<String>,
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    /// Allowed standard errors (default 3 for expectation, 5 for variance).
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    /// Preferential-attachment graph, ~5,000 nodes and ~50,000 edges.
    Pa,
    /// The same graph with every edge repeated 1 to 5 times.
    PaMulti,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    dataset: Dataset,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: furl::Error| e.to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_raw(path: Option<&Path>) -> Result<RawStream> {
    let raw = match path {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            RawStream::read(BufReader::new(file))
        }
        None => RawStream::read(io::stdin().lock()),
    };
    let source = path.map_or_else(|| "<stdin>".to_owned(), |p| p.display().to_string());
    raw.with_context(|| format!("reading {source}"))
}

struct Loaded {
    interner: NodeInterner,
    edges: Vec<Edge>,
}

/// Reads and preprocesses the input for the given counting semantics.
fn load(io: &IoArgs, counting: Counting, seed: u64) -> Result<Loaded> {
    let raw = read_raw(io.input.as_deref())?;
    let edges = match counting {
        Counting::Simple => preprocess_simple(raw.pairs),
        Counting::Binary | Counting::Weighted => preprocess_multi(raw.pairs),
    };
    let edges = if io.shuffle {
        shuffle_stream(edges, seed)
    } else {
        edges
    };
    Ok(Loaded {
        interner: raw.interner,
        edges,
    })
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi <= 1.0) {
        bail!("--xi must lie in (0, 1], got {xi}");
    }
    Ok(())
}

fn resolve_config(args: &EstimatorArgs, edges: &[Edge]) -> Result<EstimatorConfig> {
    let config = if args.variant == Variant::Mascot {
        let Some(p) = args.p else {
            bail!("mascot needs --p");
        };
        EstimatorConfig::mascot(p)
    } else {
        let memory = match (args.memory, args.xi) {
            (Some(m), None) => m,
            (None, Some(xi)) => {
                check_xi(xi)?;
                memory_for_xi(args.variant, xi, &StreamStats::of(edges))
            }
            _ => bail!("{} needs exactly one of --memory or --xi", args.variant),
        };
        EstimatorConfig::new(args.variant, memory)
    };
    let mut config = config
        .with_delta(args.delta)
        .with_seed(args.seed)
        .with_hash_seed(args.hash_seed);
    config.bucket = args.bucket;
    config.validate()?;
    Ok(config)
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let counting = match args.mode {
        PreprocessMode::Simple => Counting::Simple,
        PreprocessMode::Multi => Counting::Weighted,
    };
    let loaded = load(&args.io, counting, args.seed)?;
    write_edge_list(
        open_output(args.io.output.as_deref())?,
        &loaded.edges,
        &loaded.interner,
    )?;
    eprintln!("{}", StreamStats::of(&loaded.edges));
    Ok(())
}

fn run_estimator(run: &RunArgs) -> Result<(Loaded, Estimator)> {
    let loaded = load(&run.io, run.est.variant.counting(), run.est.seed)?;
    let config = resolve_config(&run.est, &loaded.edges)?;
    let clock = Instant::now();
    let mut est = Estimator::new(config)?;
    est.process_all(&loaded.edges)?;
    eprintln!(
        "peak_buffer={} wall_ms={:.3}",
        est.peak_buffer_len(),
        clock.elapsed().as_secs_f64() * 1e3
    );
    Ok((loaded, est))
}

fn cmd_estimate(args: RunArgs) -> Result<()> {
    let (loaded, est) = run_estimator(&args)?;
    est.query()
        .write_csv(open_output(args.io.output.as_deref())?, &loaded.interner)?;
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> Result<()> {
    let counting = match args.mode {
        ExactMode::Simple => Counting::Simple,
        ExactMode::Binary => Counting::Binary,
        ExactMode::Weighted => Counting::Weighted,
    };
    let loaded = load(&args.io, counting, args.seed)?;
    let counts = match args.mode {
        ExactMode::Simple => exact_local_simple(&loaded.edges),
        ExactMode::Binary => exact_local_binary(&loaded.edges),
        ExactMode::Weighted => exact_local_weighted(&loaded.edges),
    };
    counts.write_csv(open_output(args.io.output.as_deref())?, &loaded.interner)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let loaded = load(
        &args.run.io,
        args.run.est.variant.counting(),
        args.run.est.seed,
    )?;
    let config = resolve_config(&args.run.est, &loaded.edges)?;
    let truth = truth_for(config.variant, &loaded.edges);
    let summary = run_trials(&loaded.edges, &config, args.trials, &truth)?;
    let mut rows = summary.reports;
    rows.extend(TrialReport::mean_of(&rows));
    write_reports(open_output(args.run.io.output.as_deref())?, &rows)?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.variant == Variant::Mascot {
        bail!("sweep varies the buffer size; use evaluate with --p for mascot");
    }
    let loaded = load(&args.io, args.variant.counting(), args.seed)?;
    let stats = StreamStats::of(&loaded.edges);
    let truth = truth_for(args.variant, &loaded.edges);
    let mut rows = Vec::new();
    for &xi in &args.xis {
        check_xi(xi)?;
        let memory = memory_for_xi(args.variant, xi, &stats);
        for &delta in &args.deltas {
            let mut config = EstimatorConfig::new(args.variant, memory)
                .with_delta(delta)
                .with_seed(args.seed)
                .with_hash_seed(args.hash_seed);
            config.bucket = args.bucket;
            config.validate()?;
            rows.extend(run_trials(&loaded.edges, &config, args.trials, &truth)?.reports);
        }
    }
    write_reports(open_output(args.io.output.as_deref())?, &rows)?;
    Ok(())
}

fn cmd_scatter(args: RunArgs) -> Result<()> {
    let (loaded, est) = run_estimator(&args)?;
    let degree = degrees(&loaded.edges);
    let mut out = open_output(args.io.output.as_deref())?;
    writeln!(out, "node,degree,estimate")?;
    for (u, x) in est.query().iter() {
        let d = degree.get(&u).copied().unwrap_or(0);
        writeln!(
            out,
            "{},{d},{}",
            loaded.interner.token(u),
            format_estimate(x)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<bool> {
    let mut out = open_output(args.output.as_deref())?;
    if args.kind == ProbeKind::Threshold {
        let t = concentration_threshold(args.memory, args.delta)?;
        writeln!(out, "memory,delta,threshold,ratio")?;
        writeln!(
            out,
            "{},{},{t},{}",
            args.memory,
            format_estimate(args.delta),
            format_estimate(t as f64 / args.memory as f64)
        )?;
        out.flush()?;
        return Ok(true);
    }
    let mut config = EstimatorConfig::new(args.variant, args.memory)
        .with_delta(args.delta)
        .with_seed(args.seed)
        .with_hash_seed(args.hash_seed);
    config.bucket = args.bucket;
    config.validate()?;
    let probe = match &args.input {
        Some(path) => {
            let io = IoArgs {
                input: Some(path.clone()),
                output: None,
                shuffle: false,
            };
            if args.triangle.len() != 3 {
                bail!("--triangle takes exactly three node tokens");
            }
            let loaded = load(&io, args.variant.counting(), args.seed)?;
            let mut nodes = [furl::NodeId(0); 3];
            for (slot, token) in nodes.iter_mut().zip(&args.triangle) {
                *slot = loaded
                    .interner
                    .get(token)
                    .with_context(|| format!("node {token:?} does not occur in the input"))?;
            }
            ProbeStream {
                edges: loaded.edges,
                triangle: nodes,
            }
        }
        None => build_probe_stream(&config, args.formation_bucket, args.query_bucket)?,
    };
    let outcome: ProbeOutcome = match args.kind {
        ProbeKind::Expectation => {
            probe_expectation(&config, &probe, args.trials, args.tolerance.unwrap_or(3.0))?
        }
        _ => probe_variance(&config, &probe, args.trials, args.tolerance.unwrap_or(5.0))?,
    };
    writeln!(out, "{}", ProbeOutcome::CSV_HEADER)?;
    writeln!(out, "{}", outcome.csv_row())?;
    out.flush()?;
    Ok(outcome.pass())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let edges = match args.dataset {
        Dataset::Pa => bundled_pa_graph(),
        Dataset::PaMulti => bundled_pa_multigraph(),
    };
    write_edge_list(
        open_output(args.output.as_deref())?,
        &edges,
        &NodeInterner::new(),
    )?;
    eprintln!("{}", StreamStats::of(&edges));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(a) => cmd_preprocess(a).map(|_| true),
        Command::Estimate(a) => cmd_estimate(a).map(|_| true),
        Command::Exact(a) => cmd_exact(a).map(|_| true),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Scatter(a) => cmd_scatter(a).map(|_| true),
        Command::Probe(a) => cmd_probe(a),
        Command::Generate(a) => cmd_generate(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
