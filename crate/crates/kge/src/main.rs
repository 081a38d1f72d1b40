use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kge::analysis::{hypergraph_stats, simulate_collisions, CollisionProbabilities};
use kge::bench::{emit_report, run_sweep, ReportFormat};
use kge::evaluator::evaluate;
use kge::kgdata::{ColumnOrder, KnowledgeGraph};
use kge::models::{ModelKind, Similarity};
use kge::sampling::WorkerRng;
use kge::trainer::{load_embeddings, save_embeddings, train, NormPolicy, Optimizer, TrainConfig};

#[derive(Parser)]
#[command(
    name = "kge",
    version,
    about = "Knowledge graph embeddings with lock-free parallel training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings and optionally save them plus a JSON report.
    Train(TrainCmd),
    /// Evaluate saved embeddings on the test split (Mean Rank, Hits@10).
    Eval(EvalCmd),
    /// Hypergraph degree statistics and sparsity of a training file.
    Analyze(AnalyzeCmd),
    /// Analytic vs simulated collision probabilities across worker counts.
    Simulate(SimulateCmd),
    /// Wall-clock thread-scaling sweep with per-point quality metrics.
    Bench(BenchCmd),
}

#[derive(Args)]
struct GraphArgs {
    /// Training triples (TSV, three columns).
    #[arg(long)]
    train: PathBuf,
    /// Validation triples.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Test triples.
    #[arg(long)]
    test: Option<PathBuf>,
    /// File column layout: hrt or htr.
    #[arg(long, value_parser = ColumnOrder::from_str, default_value = "htr")]
    column_order: ColumnOrder,
}

impl GraphArgs {
    fn load(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::load(
            &self.train,
            self.valid.as_deref(),
            self.test.as_deref(),
            self.column_order,
        )
        .context("failed to load graph")
    }
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, value_parser = ModelKind::from_str, default_value = "transe")]
    model: ModelKind,
    #[arg(long, value_parser = Optimizer::from_str, default_value = "sgd")]
    optimizer: Optimizer,
    /// Embedding dimension.
    #[arg(long, default_value_t = 50)]
    dim: usize,
    /// Margin between positive and negative scores.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Learning rate (AdaGrad: the base rate).
    #[arg(long, default_value_t = 0.01)]
    rate: f64,
    /// Total epoch budget, split across threads.
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, value_parser = Similarity::from_str, default_value = "l1")]
    sim: Similarity,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Entity normalization: sample (touched entities per iteration) or
    /// epoch (all entities per epoch).
    #[arg(long, value_parser = NormPolicy::from_str, default_value = "sample")]
    norm_policy: NormPolicy,
    /// Resample training negatives until they are unknown triples.
    #[arg(long)]
    avoid_known_negatives: bool,
    /// Pin workers one-per-core where supported.
    #[arg(long)]
    pin_workers: bool,
}

impl HyperArgs {
    fn to_config(&self) -> TrainConfig {
        TrainConfig::default()
            .with_model(self.model)
            .with_optimizer(self.optimizer)
            .with_dim(self.dim)
            .with_margin(self.margin)
            .with_rate(self.rate)
            .with_epochs(self.epochs)
            .with_sim(self.sim)
            .with_seed(self.seed)
            .with_norm_policy(self.norm_policy)
            .with_avoid_known_negatives(self.avoid_known_negatives)
            .with_pin_workers(self.pin_workers)
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Worker thread count.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Directory for the embedding files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write the JSON training report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCmd {
    #[command(flatten)]
    graph: GraphArgs,
    /// Directory written by `kge train --out-dir`.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_parser = ModelKind::from_str, default_value = "transe")]
    model: ModelKind,
    #[arg(long, value_parser = Similarity::from_str, default_value = "l1")]
    sim: Similarity,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_parser = ColumnOrder::from_str, default_value = "htr")]
    column_order: ColumnOrder,
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_parser = ColumnOrder::from_str, default_value = "htr")]
    column_order: ColumnOrder,
    /// Inclusive worker-count range, e.g. 1..64.
    #[arg(long, value_parser = parse_range, default_value = "1..16")]
    threads_range: (usize, usize),
    /// Monte-Carlo trials per worker count.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCmd {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Comma-separated worker counts; must include 1.
    #[arg(long = "threads", value_delimiter = ',', default_value = "1,2,4,8")]
    thread_counts: Vec<usize>,
    /// Runs to average per sweep point.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Report file; .json selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected `lo..hi`, got `{s}`"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
    if lo == 0 || hi < lo {
        return Err(format!("invalid range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

fn out_writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(cmd) => run_train(cmd),
        Command::Eval(cmd) => run_eval(cmd),
        Command::Analyze(cmd) => run_analyze(cmd),
        Command::Simulate(cmd) => run_simulate(cmd),
        Command::Bench(cmd) => run_bench(cmd),
    }
}

fn run_train(cmd: TrainCmd) -> Result<()> {
    let graph = cmd.graph.load()?;
    eprintln!(
        "loaded graph: {} entities, {} relations, {} train / {} valid / {} test",
        graph.n_entities(),
        graph.n_relations(),
        graph.n_train(),
        graph.valid().len(),
        graph.test().len()
    );
    let config = cmd.hyper.to_config().with_threads(cmd.threads);
    let (store, report) = train(&graph, &config)?;
    eprintln!(
        "trained {} iterations in {:.2}s",
        report.iterations_executed, report.total_seconds
    );
    if let Some(dir) = &cmd.out_dir {
        save_embeddings(&store, graph.vocab(), dir)?;
        eprintln!("embeddings written to {}", dir.display());
    }
    let mut w = out_writer(cmd.report.as_ref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    Ok(())
}

fn run_eval(cmd: EvalCmd) -> Result<()> {
    if cmd.graph.test.is_none() {
        bail!("eval requires --test");
    }
    let graph = cmd.graph.load()?;
    let store = load_embeddings(&cmd.embeddings, graph.vocab())?;
    let metrics = evaluate(&store, &graph, cmd.model, cmd.sim)?;
    let mut w = io::stdout().lock();
    serde_json::to_writer_pretty(&mut w, &metrics)?;
    writeln!(w)?;
    Ok(())
}

fn run_analyze(cmd: AnalyzeCmd) -> Result<()> {
    let graph = KnowledgeGraph::load(&cmd.train, None, None, cmd.column_order)?;
    let stats = hypergraph_stats(&graph);
    let mut w = io::stdout().lock();
    serde_json::to_writer_pretty(&mut w, &stats)?;
    writeln!(w)?;
    Ok(())
}

fn run_simulate(cmd: SimulateCmd) -> Result<()> {
    let graph = KnowledgeGraph::load(&cmd.train, None, None, cmd.column_order)?;
    let stats = hypergraph_stats(&graph);
    let mut rng = WorkerRng::new(cmd.seed, 0);
    let mut w = out_writer(cmd.out.as_ref())?;
    writeln!(
        w,
        "p,analytic_distinct,analytic_norel,analytic_noent,\
         empirical_distinct,empirical_norel,empirical_noent,\
         stderr_distinct,stderr_norel,stderr_noent"
    )?;
    let (lo, hi) = cmd.threads_range;
    for p in lo..=hi {
        let analytic = CollisionProbabilities::from_stats(&stats, p);
        let sim = simulate_collisions(&graph, p, cmd.trials, &mut rng);
        writeln!(
            w,
            "{p},{},{},{},{},{},{},{},{},{}",
            analytic.p_distinct,
            analytic.p_no_relation,
            analytic.p_no_entity,
            sim.empirical_distinct,
            sim.empirical_no_relation,
            sim.empirical_no_entity,
            sim.stderr_distinct,
            sim.stderr_no_relation,
            sim.stderr_no_entity
        )?;
    }
    Ok(())
}

fn run_bench(cmd: BenchCmd) -> Result<()> {
    if cmd.graph.test.is_none() {
        bail!("bench requires --test for per-point quality metrics");
    }
    let graph = cmd.graph.load()?;
    let config = cmd.hyper.to_config();
    let result = run_sweep(&graph, &config, &cmd.thread_counts, cmd.repeats)?;
    for row in &result.rows {
        eprintln!(
            "p={:>3}  total {:>8.2}s  speedup {:>6.2}x  hits@10(filt) {:>5.1}",
            row.threads, row.total_seconds, row.speedup, row.metrics.hits10_filtered
        );
    }
    let format = match &cmd.out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => ReportFormat::Json,
        _ => ReportFormat::Csv,
    };
    let mut w = out_writer(cmd.out.as_ref())?;
    emit_report(&result, format, &mut w)?;
    Ok(())
}
