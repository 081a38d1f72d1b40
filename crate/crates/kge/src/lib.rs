//! Translation-based knowledge graph embeddings with lock-free
//! shared-memory parallel training.
//!
//! The crate trains TransE and TransH models (SGD or AdaGrad) on triple
//! corpora such as WN18 and FB15k. Training runs on any number of worker
//! threads over a single shared parameter store without locks: workers
//! read and write individual embedding elements concurrently and tolerate
//! the rare collisions that sparse knowledge graphs produce. The
//! [`analysis`] module quantifies exactly how rare those collisions are,
//! both analytically and by Monte-Carlo simulation, so the safe degree of
//! parallelism for a given corpus can be computed before training.
//!
//! # Modules
//!
//! - [`kgdata`]: TSV ingestion, vocabularies, membership indices, and
//!   seeded synthetic graphs.
//! - [`models`]: score functions and analytic gradients for TransE and
//!   TransH.
//! - [`sampling`]: per-worker seeded RNG streams, positive sampling, and
//!   negative corruption.
//! - [`trainer`]: the shared [`trainer::EmbeddingStore`] plus serial and
//!   lock-free parallel training loops.
//! - [`analysis`]: hypergraph degree statistics, sparsity, collision
//!   probabilities, and a collision simulator.
//! - [`evaluator`]: link-prediction ranking, Mean Rank and Hits@10 under
//!   Raw and Filter settings.
//! - [`bench`]: wall-clock thread-scaling sweeps and report emission.
//!
//! # Quick start
//!
//! ```
//! use kge::kgdata::synth_graph;
//! use kge::trainer::{train, TrainConfig};
//!
//! let graph = synth_graph(50, 5, 500, 7).unwrap();
//! let config = TrainConfig::default().with_dim(10).with_epochs(20);
//! let (store, report) = train(&graph, &config).unwrap();
//! assert_eq!(store.dim(), 10);
//! assert_eq!(report.loss_curve.len(), 20);
//! ```
//!
//! The `examples/` directory contains one runnable program per major
//! capability; `cargo run --example link_prediction` is a good tour.

pub mod analysis;
pub mod bench;
pub mod evaluator;
pub mod kgdata;
pub mod models;
pub mod sampling;
pub mod trainer;

pub use analysis::{CollisionProbabilities, CollisionSimResult, HypergraphStats};
pub use bench::{BenchResult, BenchRow, ReportFormat};
pub use evaluator::{EvalMetrics, RankMode, RankResult};
pub use kgdata::{ColumnOrder, KnowledgeGraph, Side, Split, Triple, Vocabulary};
pub use models::{GradientBundle, ModelKind, SampleVectors, Similarity};
pub use sampling::{Sample, WorkerRng};
pub use trainer::{
    train, EmbeddingStore, NormPolicy, Optimizer, TrainConfig, TrainReport,
};
