//! Wall-clock benchmarking across thread counts.
//!
//! A sweep trains the same configuration once per worker count (with a
//! distinct derived seed per point), evaluates each resulting store, and
//! reports total and per-epoch times plus the speedup ratio
//! `t(threads=1) / t(threads=p)`. The baseline is always this binary's
//! own single-threaded run, so the ratio isolates parallelism from code
//! quality.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{evaluate, EvalError, EvalMetrics};
use crate::kgdata::KnowledgeGraph;
use crate::sampling::derive_seed;
use crate::trainer::{train, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("thread_counts must include 1 (the serial baseline)")]
    MissingBaseline,
    #[error("thread_counts must not be empty")]
    EmptySweep,
    #[error("repeats must be >= 1")]
    ZeroRepeats,
    #[error("sweep aborted at threads={threads}: {source}; {completed} point(s) completed")]
    Aborted {
        threads: usize,
        completed: usize,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub threads: usize,
    pub total_seconds: f64,
    /// Mean seconds per worker epoch.
    pub epoch_seconds: f64,
    /// `t(1) / t(threads)`; 1.0 for the baseline by definition.
    pub speedup: f64,
    pub metrics: EvalMetrics,
}

/// A completed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub repeats: usize,
    pub workers_pinned: bool,
}

/// Output encoding for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Train and evaluate once per thread count, averaging `repeats` runs per
/// point. Requires the serial baseline (`1`) in `thread_counts` and a
/// nonempty test split for the per-point metrics.
pub fn run_sweep(
    graph: &KnowledgeGraph,
    config: &TrainConfig,
    thread_counts: &[usize],
    repeats: usize,
) -> Result<BenchResult, BenchError> {
    if thread_counts.is_empty() {
        return Err(BenchError::EmptySweep);
    }
    if !thread_counts.contains(&1) {
        return Err(BenchError::MissingBaseline);
    }
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }

    let mut rows = Vec::with_capacity(thread_counts.len());
    let mut pinned = config.pin_workers;
    for (point, &threads) in thread_counts.iter().enumerate() {
        let mut total = 0.0;
        let mut epoch_mean = 0.0;
        let mut metrics_acc: Option<EvalMetrics> = None;
        for rep in 0..repeats {
            let seed = derive_seed(config.seed, (threads as u64) << 16 | rep as u64);
            let run_config = config.clone().with_threads(threads).with_seed(seed);
            let (store, report) = train(graph, &run_config).map_err(|source| {
                BenchError::Aborted {
                    threads,
                    completed: point,
                    source,
                }
            })?;
            pinned &= report.workers_pinned;
            total += report.total_seconds;
            let epochs = report.epoch_seconds.len().max(1) as f64;
            epoch_mean += report.epoch_seconds.iter().sum::<f64>() / epochs;
            let metrics = evaluate(&store, graph, config.model, config.sim)?;
            metrics_acc = Some(match metrics_acc {
                None => metrics,
                Some(prev) => merge_metrics(prev, metrics),
            });
        }
        let k = repeats as f64;
        rows.push(BenchRow {
            threads,
            total_seconds: total / k,
            epoch_seconds: epoch_mean / k,
            speedup: f64::NAN, // filled in below once the baseline is known
            metrics: scale_metrics(metrics_acc.expect("repeats >= 1"), 1.0 / k),
        });
    }

    let baseline = rows
        .iter()
        .find(|r| r.threads == 1)
        .expect("baseline presence checked above")
        .total_seconds;
    for row in &mut rows {
        row.speedup = baseline / row.total_seconds;
    }
    Ok(BenchResult {
        rows,
        repeats,
        workers_pinned: pinned,
    })
}

fn merge_metrics(a: EvalMetrics, b: EvalMetrics) -> EvalMetrics {
    EvalMetrics {
        mean_rank_raw: a.mean_rank_raw + b.mean_rank_raw,
        mean_rank_filtered: a.mean_rank_filtered + b.mean_rank_filtered,
        hits10_raw: a.hits10_raw + b.hits10_raw,
        hits10_filtered: a.hits10_filtered + b.hits10_filtered,
        count: a.count,
    }
}

fn scale_metrics(m: EvalMetrics, factor: f64) -> EvalMetrics {
    EvalMetrics {
        mean_rank_raw: m.mean_rank_raw * factor,
        mean_rank_filtered: m.mean_rank_filtered * factor,
        hits10_raw: m.hits10_raw * factor,
        hits10_filtered: m.hits10_filtered * factor,
        count: m.count,
    }
}

/// Write a sweep as CSV (`p,total_seconds,epoch_seconds,speedup,
/// hits10_filter,mr_filter`) or as JSON mirroring the same data.
pub fn emit_report<W: Write>(
    result: &BenchResult,
    format: ReportFormat,
    mut w: W,
) -> io::Result<()> {
    match format {
        ReportFormat::Csv => {
            writeln!(w, "p,total_seconds,epoch_seconds,speedup,hits10_filter,mr_filter")?;
            for row in &result.rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    row.threads,
                    row.total_seconds,
                    row.epoch_seconds,
                    row.speedup,
                    row.metrics.hits10_filtered,
                    row.metrics.mean_rank_filtered
                )?;
            }
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, result)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::{synth_graph, KnowledgeGraph};

    fn bench_graph() -> KnowledgeGraph {
        let g = synth_graph(30, 3, 220, 12).unwrap();
        let mut train = g.train().to_vec();
        let test = train.split_off(200);
        KnowledgeGraph::from_parts(g.vocab().clone(), train, Vec::new(), test).unwrap()
    }

    fn quick_config() -> TrainConfig {
        TrainConfig::default().with_dim(4).with_epochs(4)
    }

    #[test]
    fn single_point_sweep_has_unit_speedup() {
        let graph = bench_graph();
        let result = run_sweep(&graph, &quick_config(), &[1], 1).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.rows[0].speedup, 1.0);
        assert!(result.rows[0].total_seconds > 0.0);
    }

    #[test]
    fn sweep_without_baseline_is_rejected() {
        let graph = bench_graph();
        assert!(matches!(
            run_sweep(&graph, &quick_config(), &[2, 4], 1),
            Err(BenchError::MissingBaseline)
        ));
        assert!(matches!(
            run_sweep(&graph, &quick_config(), &[], 1),
            Err(BenchError::EmptySweep)
        ));
    }

    #[test]
    fn csv_report_has_header_and_one_line_per_row() {
        let graph = bench_graph();
        let result = run_sweep(&graph, &quick_config(), &[1, 2, 4], 1).unwrap();
        let mut buf = Vec::new();
        emit_report(&result, ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("p,total_seconds"));
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn json_report_round_trips() {
        let graph = bench_graph();
        let result = run_sweep(&graph, &quick_config(), &[1, 2], 1).unwrap();
        let mut buf = Vec::new();
        emit_report(&result, ReportFormat::Json, &mut buf).unwrap();
        let parsed: BenchResult = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed, result);
    }

    #[test]
    fn sweep_points_use_distinct_seeds() {
        // Different sweep points must not reuse the sampling stream.
        let a = derive_seed(42, (1u64) << 16);
        let b = derive_seed(42, (2u64) << 16);
        assert_ne!(a, b);
    }
}
