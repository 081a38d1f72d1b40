//! Serial and lock-free parallel training over a shared parameter store.
//!
//! `p` workers share one [`EmbeddingStore`]. Each worker owns its RNG and
//! loop state, runs `ceil(epochs / p)` epochs of `n` iterations (sample,
//! gradient, unsynchronized apply), and never acquires a lock in the hot
//! loop. Parameter reads and writes are element-granular; whole-vector
//! reads may mix old and new elements, which sparse corpora make harmless.
//! With one worker (`threads = 1`) the run is bit-for-bit deterministic
//! for a fixed seed.
//!
//! The optimizer is either constant-rate SGD or AdaGrad with per-element
//! accumulators of squared gradients; the accumulators are shared
//! lock-free under the same element contract as the parameters.

mod store;

pub use store::{init_store, load_embeddings, save_embeddings, EmbeddingStore, SharedMatrix};

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgdata::KnowledgeGraph;
use crate::models::{
    grad_transe_into, grad_transh_into, GradientBundle, ModelError, ModelKind, SampleVectors,
    Similarity,
};
use crate::sampling::{corrupt, sample_positive, Sample, SampleError, WorkerRng};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("non-finite loss at worker {worker}: {detail}")]
    NonFinite { worker: usize, detail: String },
    #[error("worker {worker} panicked")]
    WorkerPanic { worker: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Update rule applied each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    AdaGrad,
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adagrad" => Ok(Optimizer::AdaGrad),
            other => Err(format!("unknown optimizer `{other}` (expected sgd or adagrad)")),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdaGrad => "adagrad",
        })
    }
}

/// When entity vectors are rescaled to unit norm.
///
/// `SampleEntities` (the default) normalizes just the entities touched by
/// the current sample at the start of each iteration, which keeps an
/// iteration O(d). `AllPerEpoch` normalizes every entity at the start of
/// each worker epoch instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormPolicy {
    SampleEntities,
    AllPerEpoch,
}

impl FromStr for NormPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(NormPolicy::SampleEntities),
            "epoch" => Ok(NormPolicy::AllPerEpoch),
            other => Err(format!("unknown norm policy `{other}` (expected sample or epoch)")),
        }
    }
}

impl fmt::Display for NormPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormPolicy::SampleEntities => "sample",
            NormPolicy::AllPerEpoch => "epoch",
        })
    }
}

/// Diagnostics hook: stall one worker by sleeping before every iteration.
/// Used to demonstrate that the remaining workers make progress
/// independently; not part of normal configuration.
#[derive(Debug, Clone, Copy)]
pub struct WorkerDelay {
    pub worker: usize,
    pub per_iteration: Duration,
}

/// Hyperparameters and execution knobs for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub sim: Similarity,
    pub dim: usize,
    pub margin: f64,
    /// Learning rate: the constant SGD step, or the AdaGrad base rate.
    pub rate: f64,
    /// Total epoch budget, divided across workers as `ceil(epochs / threads)`.
    pub epochs: usize,
    pub threads: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub norm_policy: NormPolicy,
    /// Resample training negatives until they are unknown triples.
    pub avoid_known_negatives: bool,
    /// Pin each worker to a core when the platform supports it.
    pub pin_workers: bool,
    #[serde(skip)]
    pub worker_delay: Option<WorkerDelay>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::TransE,
            sim: Similarity::L1,
            dim: 20,
            margin: 1.0,
            rate: 0.01,
            epochs: 100,
            threads: 1,
            optimizer: Optimizer::Sgd,
            seed: 42,
            norm_policy: NormPolicy::SampleEntities,
            avoid_known_negatives: false,
            pin_workers: false,
            worker_delay: None,
        }
    }
}

impl TrainConfig {
    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = model;
        self
    }

    pub fn with_sim(mut self, sim: Similarity) -> Self {
        self.sim = sim;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_norm_policy(mut self, policy: NormPolicy) -> Self {
        self.norm_policy = policy;
        self
    }

    pub fn with_avoid_known_negatives(mut self, avoid: bool) -> Self {
        self.avoid_known_negatives = avoid;
        self
    }

    pub fn with_pin_workers(mut self, pin: bool) -> Self {
        self.pin_workers = pin;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.dim == 0 {
            return Err(TrainError::InvalidConfig("dim must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(TrainError::InvalidConfig("threads must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !self.margin.is_finite() || self.margin <= 0.0 {
            return Err(TrainError::InvalidConfig("margin must be > 0".into()));
        }
        if !self.rate.is_finite() || self.rate <= 0.0 {
            return Err(TrainError::InvalidConfig("rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-element sums of squared gradients driving the adaptive rate.
///
/// The effective step for an element with gradient delta `g` is
/// `rate * g / sqrt(acc + g^2 + epsilon)`, the accumulator having been
/// incremented by `g^2` first. Accumulator increments use a CAS loop so
/// the sums never lose an update and never decrease.
#[derive(Debug)]
pub struct AdaGradState {
    entities: SharedMatrix,
    relations: SharedMatrix,
    normals: Option<SharedMatrix>,
    pub epsilon: f64,
}

pub const ADAGRAD_EPSILON: f64 = 1e-8;

impl AdaGradState {
    pub fn zeros_like(store: &EmbeddingStore) -> Self {
        AdaGradState {
            entities: SharedMatrix::zeros(store.entities().rows(), store.dim()),
            relations: SharedMatrix::zeros(store.relations().rows(), store.dim()),
            normals: store
                .normals()
                .map(|m| SharedMatrix::zeros(m.rows(), store.dim())),
            epsilon: ADAGRAD_EPSILON,
        }
    }

    pub fn entities(&self) -> &SharedMatrix {
        &self.entities
    }

    pub fn relations(&self) -> &SharedMatrix {
        &self.relations
    }

    pub fn normals(&self) -> Option<&SharedMatrix> {
        self.normals.as_ref()
    }
}

/// Timing, loss curve, and bookkeeping for one training run.
///
/// `epoch_seconds` and `loss_curve` are sampled on worker 0 (one entry per
/// worker epoch); `worker_seconds` is each worker's time to finish its
/// quota.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub total_seconds: f64,
    pub epoch_seconds: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub config: TrainConfig,
    pub iterations_executed: u64,
    pub worker_seconds: Vec<f64>,
    pub workers_pinned: bool,
}

/// Reusable per-worker buffers so the hot loop never allocates.
struct WorkerScratch {
    head: Vec<f64>,
    relation: Vec<f64>,
    tail: Vec<f64>,
    neg_head: Vec<f64>,
    neg_tail: Vec<f64>,
    normal: Vec<f64>,
    bundle: GradientBundle,
}

impl WorkerScratch {
    fn new(dim: usize, with_normal: bool) -> Self {
        WorkerScratch {
            head: vec![0.0; dim],
            relation: vec![0.0; dim],
            tail: vec![0.0; dim],
            neg_head: vec![0.0; dim],
            neg_tail: vec![0.0; dim],
            normal: vec![0.0; dim],
            bundle: GradientBundle::zeros(dim, with_normal),
        }
    }
}

fn normalize_sample_entities(store: &EmbeddingStore, sample: &Sample) -> Result<(), ModelError> {
    let ids = [
        sample.positive.head,
        sample.positive.tail,
        sample.corrupted_entity(),
    ];
    for (i, &id) in ids.iter().enumerate() {
        if ids[..i].contains(&id) {
            continue;
        }
        store.entities().normalize_row(id)?;
    }
    Ok(())
}

/// One SGD iteration: optional per-sample normalization, gradient, and
/// unsynchronized element-wise application to the store. Returns the hinge
/// value before the update; an inactive hinge leaves the store untouched.
pub fn sgd_iteration(
    store: &EmbeddingStore,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    let mut scratch = WorkerScratch::new(config.dim, config.model == ModelKind::TransH);
    step(store, None, sample, config, &mut scratch, 0)
}

/// One AdaGrad iteration: like [`sgd_iteration`] but the per-element step
/// is scaled by the accumulated squared gradients in `state`. An inactive
/// hinge leaves both the store and the accumulators untouched.
pub fn adagrad_iteration(
    store: &EmbeddingStore,
    state: &AdaGradState,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    let mut scratch = WorkerScratch::new(config.dim, config.model == ModelKind::TransH);
    step(store, Some(state), sample, config, &mut scratch, 0)
}

fn step(
    store: &EmbeddingStore,
    ada: Option<&AdaGradState>,
    sample: &Sample,
    config: &TrainConfig,
    scratch: &mut WorkerScratch,
    worker: usize,
) -> Result<f64, TrainError> {
    if config.norm_policy == NormPolicy::SampleEntities {
        normalize_sample_entities(store, sample)?;
    }

    let pos = &sample.positive;
    let neg = &sample.negative;
    store.entities().read_row_into(pos.head, &mut scratch.head);
    store
        .relations()
        .read_row_into(pos.relation, &mut scratch.relation);
    store.entities().read_row_into(pos.tail, &mut scratch.tail);
    store.entities().read_row_into(neg.head, &mut scratch.neg_head);
    store.entities().read_row_into(neg.tail, &mut scratch.neg_tail);

    let vectors = SampleVectors {
        head: &scratch.head,
        relation: &scratch.relation,
        tail: &scratch.tail,
        neg_head: &scratch.neg_head,
        neg_tail: &scratch.neg_tail,
    };

    // AdaGrad consumes raw (rate-1) gradients and applies its own scale.
    let rate = if ada.is_some() { 1.0 } else { config.rate };
    let loss = match config.model {
        ModelKind::TransE => {
            grad_transe_into(&vectors, config.sim, config.margin, rate, &mut scratch.bundle)?
        }
        ModelKind::TransH => {
            let normals = store.normals().expect("TransH store has normals");
            normals.read_row_into(pos.relation, &mut scratch.normal);
            // A concurrent update can leave the read normal slightly
            // off-unit; normalize the local copy so the projection
            // precondition holds for this iteration's math.
            crate::models::normalize(&mut scratch.normal)?;
            grad_transh_into(
                &vectors,
                &scratch.normal,
                config.sim,
                config.margin,
                rate,
                &mut scratch.bundle,
            )?
        }
    };
    if !loss.is_finite() {
        return Err(TrainError::NonFinite {
            worker,
            detail: format!("hinge loss {loss} on sample {sample:?}"),
        });
    }
    if !scratch.bundle.active {
        return Ok(loss);
    }

    let bundle = &scratch.bundle;
    match ada {
        None => {
            store.entities().add_row(pos.head, &bundle.d_head);
            store.entities().add_row(neg.head, &bundle.d_neg_head);
            store.relations().add_row(pos.relation, &bundle.d_relation);
            store
                .relations()
                .add_row(pos.relation, &bundle.d_neg_relation);
            store.entities().add_row(pos.tail, &bundle.d_tail);
            store.entities().add_row(neg.tail, &bundle.d_neg_tail);
            if let Some(d_normal) = &bundle.d_normal {
                let normals = store.normals().expect("TransH store has normals");
                normals.add_row(pos.relation, d_normal);
                normals.normalize_row(pos.relation)?;
            }
        }
        Some(state) => {
            let eta = config.rate;
            let eps = state.epsilon;
            adagrad_row(store.entities(), state.entities(), pos.head, &bundle.d_head, eta, eps);
            adagrad_row(
                store.entities(),
                state.entities(),
                neg.head,
                &bundle.d_neg_head,
                eta,
                eps,
            );
            adagrad_row(
                store.relations(),
                state.relations(),
                pos.relation,
                &bundle.d_relation,
                eta,
                eps,
            );
            adagrad_row(
                store.relations(),
                state.relations(),
                pos.relation,
                &bundle.d_neg_relation,
                eta,
                eps,
            );
            adagrad_row(store.entities(), state.entities(), pos.tail, &bundle.d_tail, eta, eps);
            adagrad_row(
                store.entities(),
                state.entities(),
                neg.tail,
                &bundle.d_neg_tail,
                eta,
                eps,
            );
            if let Some(d_normal) = &bundle.d_normal {
                let normals = store.normals().expect("TransH store has normals");
                let acc = state.normals().expect("TransH state has normal accumulators");
                adagrad_row(normals, acc, pos.relation, d_normal, eta, eps);
                normals.normalize_row(pos.relation)?;
            }
        }
    }
    Ok(loss)
}

#[inline]
fn adagrad_row(
    params: &SharedMatrix,
    acc: &SharedMatrix,
    row: usize,
    grads: &[f64],
    rate: f64,
    epsilon: f64,
) {
    for (k, &g) in grads.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let total = acc.accumulate(row, k, g * g);
        params.add(row, k, rate * g / (total + epsilon).sqrt());
    }
}

struct WorkerStats {
    epoch_losses: Vec<f64>,
    epoch_seconds: Vec<f64>,
    elapsed_seconds: f64,
    pinned: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    worker: usize,
    graph: &KnowledgeGraph,
    store: &EmbeddingStore,
    ada: Option<&AdaGradState>,
    config: &TrainConfig,
    epochs: usize,
    abort: &AtomicBool,
    iterations: &AtomicU64,
) -> Result<WorkerStats, TrainError> {
    let pinned = config.pin_workers && pin_current_thread(worker);
    let mut rng = WorkerRng::new(config.seed, worker as u64);
    let mut scratch = WorkerScratch::new(config.dim, config.model == ModelKind::TransH);
    let n = graph.n_train();
    let delay = config
        .worker_delay
        .filter(|d| d.worker == worker)
        .map(|d| d.per_iteration);

    let fail = |err: TrainError| {
        abort.store(true, Ordering::Relaxed);
        err
    };

    let started = Instant::now();
    let mut local_iterations = 0u64;
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut epoch_seconds = Vec::with_capacity(epochs);
    'epochs: for _ in 0..epochs {
        let epoch_started = Instant::now();
        if config.norm_policy == NormPolicy::AllPerEpoch {
            for row in 0..graph.n_entities() {
                store
                    .entities()
                    .normalize_row(row)
                    .map_err(|e| fail(e.into()))?;
            }
        }
        let mut loss_sum = 0.0;
        for _ in 0..n {
            if abort.load(Ordering::Relaxed) {
                break 'epochs;
            }
            if let Some(d) = delay {
                std::thread::sleep(d);
            }
            let positive = sample_positive(graph, &mut rng);
            let sample = corrupt(positive, graph, &mut rng, config.avoid_known_negatives)
                .map_err(|e| fail(e.into()))?;
            let loss = step(store, ada, &sample, config, &mut scratch, worker).map_err(fail)?;
            loss_sum += loss;
            local_iterations += 1;
        }
        epoch_losses.push(loss_sum / n as f64);
        epoch_seconds.push(epoch_started.elapsed().as_secs_f64());
    }
    iterations.fetch_add(local_iterations, Ordering::Relaxed);
    Ok(WorkerStats {
        epoch_losses,
        epoch_seconds,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        pinned,
    })
}

/// Train embeddings for `graph`: initialize a store, run
/// `config.threads` lock-free workers for `ceil(epochs / threads)` epochs
/// each, and return the store exclusively once all workers have joined.
pub fn train(
    graph: &KnowledgeGraph,
    config: &TrainConfig,
) -> Result<(EmbeddingStore, TrainReport), TrainError> {
    config.validate()?;
    let store = init_store(config, graph);
    let ada = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::AdaGrad => Some(AdaGradState::zeros_like(&store)),
    };
    let workers = config.threads;
    let epochs_per_worker = config.epochs.div_ceil(workers);
    let abort = AtomicBool::new(false);
    let iterations = AtomicU64::new(0);

    let started = Instant::now();
    let outcomes: Vec<Result<WorkerStats, TrainError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let store = &store;
                let ada = ada.as_ref();
                let abort = &abort;
                let iterations = &iterations;
                s.spawn(move || {
                    run_worker(
                        w,
                        graph,
                        store,
                        ada,
                        config,
                        epochs_per_worker,
                        abort,
                        iterations,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(w, h)| {
                h.join()
                    .unwrap_or(Err(TrainError::WorkerPanic { worker: w }))
            })
            .collect()
    });
    let total_seconds = started.elapsed().as_secs_f64();

    let mut stats = Vec::with_capacity(workers);
    for outcome in outcomes {
        stats.push(outcome?);
    }
    let report = TrainReport {
        total_seconds,
        epoch_seconds: stats[0].epoch_seconds.clone(),
        loss_curve: stats[0].epoch_losses.clone(),
        config: config.clone(),
        iterations_executed: iterations.load(Ordering::Relaxed),
        worker_seconds: stats.iter().map(|s| s.elapsed_seconds).collect(),
        workers_pinned: config.pin_workers && stats.iter().all(|s| s.pinned),
    };
    Ok((store, report))
}

/// Pin the calling thread to `core` (modulo the machine's parallelism).
/// Returns false when the platform does not support pinning.
#[cfg(target_os = "linux")]
pub fn pin_current_thread(core: usize) -> bool {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core % cores.min(libc::CPU_SETSIZE as usize), &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread(_core: usize) -> bool {
    false
}
