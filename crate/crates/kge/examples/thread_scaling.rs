//! Wall-clock thread-scaling sweep on a synthetic corpus: one training
//! run per worker count, speedup against the serial baseline, and the
//! plot-ready CSV report.
//!
//! Run with: `cargo run --release --example thread_scaling`

use kge::bench::{emit_report, run_sweep, ReportFormat};
use kge::kgdata::{synth_graph, KnowledgeGraph};
use kge::trainer::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A corpus big enough that per-epoch work dominates thread startup.
    let seeded = synth_graph(1_000, 20, 20_000, 3)?;
    let mut train = seeded.train().to_vec();
    let test = train.split_off(19_500);
    let graph = KnowledgeGraph::from_parts(seeded.vocab().clone(), train, Vec::new(), test)?;

    let config = TrainConfig::default()
        .with_dim(24)
        .with_margin(1.0)
        .with_rate(0.01)
        .with_epochs(24)
        .with_seed(3);

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let counts: Vec<usize> = [1, 2, 4, 8].into_iter().filter(|&p| p <= cores.max(2)).collect();
    println!("sweeping worker counts {counts:?} ({cores} cores available)");

    let result = run_sweep(&graph, &config, &counts, 1)?;
    for row in &result.rows {
        println!(
            "  p={:<2} total {:>6.2}s  epoch {:>7.4}s  speedup {:>5.2}x  hits@10(filt) {:>5.1}%",
            row.threads,
            row.total_seconds,
            row.epoch_seconds,
            row.speedup,
            row.metrics.hits10_filtered
        );
    }

    println!("\nCSV report:");
    emit_report(&result, ReportFormat::Csv, std::io::stdout().lock())?;
    Ok(())
}
