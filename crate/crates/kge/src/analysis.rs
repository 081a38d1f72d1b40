//! Hypergraph statistics and collision probabilities for lock-free
//! training.
//!
//! One SGD sample is a 4-node hyperedge: the three entities of a positive
//! triple plus its corruption, and the relation. Two workers can only
//! disturb each other when their concurrent samples share a relation or
//! an entity, so the degree structure of the corpus bounds how likely
//! collisions are:
//!
//! - `sigma_hat` / `sigma_bar`: the max / mean number of training triples
//!   sharing a relation with a given triple (self included);
//! - `rho_hat` / `rho_bar`: the same for sharing at least one entity;
//! - `sparsity`: `min(sigma_hat / n, rho_hat / n)`; the smaller it is,
//!   the more workers can run lock-free safely.
//!
//! For `p` workers the analytic lower bounds on collision-free sampling
//! are products of the form `prod_{i=1}^{p-1} (1 - i * s / n)` with
//! `s = 1` (distinct samples), `s = sigma_hat` (no shared relation), and
//! `s = rho_hat` (no shared entity). [`simulate_collisions`] estimates the
//! same three probabilities empirically with the trainer's own sampler.
//!
//! Statistics are computed over positive training triples only, so they
//! are fixed per corpus; the simulator draws the corruption too, matching
//! what actually collides at run time.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::kgdata::KnowledgeGraph;
use crate::sampling::{corrupt, WorkerRng};

use rand::Rng;

/// Degree statistics of the training hypergraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphStats {
    /// Training triple count.
    pub n: usize,
    /// Max number of triples sharing a relation with some triple.
    pub sigma_hat: usize,
    /// Mean over triples of the relation-sharing count.
    pub sigma_bar: f64,
    /// Max number of triples sharing an entity with some triple.
    pub rho_hat: usize,
    /// Mean over triples of the entity-sharing count.
    pub rho_bar: f64,
    /// `min(sigma_hat / n, rho_hat / n)`.
    pub sparsity: f64,
}

/// Relation-side degree stats: `(sigma_hat, sigma_bar)`.
///
/// A triple shares a relation with `count(r)` triples including itself, so
/// the maximum is the largest relation frequency and the mean is
/// `sum_r count(r)^2 / n` (each triple contributes its own relation's
/// frequency).
pub fn relation_stats(graph: &KnowledgeGraph) -> (usize, f64) {
    let n = graph.n_train();
    let mut counts = vec![0u64; graph.n_relations()];
    for t in graph.train() {
        counts[t.relation] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let sum_sq: u64 = counts.iter().map(|&c| c * c).sum();
    (max, sum_sq as f64 / n as f64)
}

/// Entity-side degree stats: `(rho_hat, rho_bar)`.
///
/// For a triple `(h, r, t)` the sharing count is `|T(h) union T(t)|` where
/// `T(e)` is the set of triples incident to entity `e` (the triple itself
/// included). The intersection `|T(h) ^ T(t)|` is the number of triples
/// whose endpoint set is exactly `{h, t}`, which one pass over endpoint
/// pairs precomputes.
pub fn entity_stats(graph: &KnowledgeGraph) -> (usize, f64) {
    let n = graph.n_train();
    let mut incident = vec![0u64; graph.n_entities()];
    let mut pair_counts: HashMap<(usize, usize), u64> = HashMap::new();
    for t in graph.train() {
        if t.head == t.tail {
            incident[t.head] += 1;
        } else {
            incident[t.head] += 1;
            incident[t.tail] += 1;
            let key = (t.head.min(t.tail), t.head.max(t.tail));
            *pair_counts.entry(key).or_default() += 1;
        }
    }
    let mut max = 0u64;
    let mut sum = 0u64;
    for t in graph.train() {
        let count = if t.head == t.tail {
            incident[t.head]
        } else {
            let key = (t.head.min(t.tail), t.head.max(t.tail));
            incident[t.head] + incident[t.tail] - pair_counts[&key]
        };
        max = max.max(count);
        sum += count;
    }
    (max as usize, sum as f64 / n as f64)
}

/// Compute all degree statistics plus sparsity in one call.
pub fn hypergraph_stats(graph: &KnowledgeGraph) -> HypergraphStats {
    let n = graph.n_train();
    let (sigma_hat, sigma_bar) = relation_stats(graph);
    let (rho_hat, rho_bar) = entity_stats(graph);
    HypergraphStats {
        n,
        sigma_hat,
        sigma_bar,
        rho_hat,
        rho_bar,
        sparsity: sparsity(sigma_hat, rho_hat, n),
    }
}

/// `min(sigma_hat / n, rho_hat / n)`.
pub fn sparsity(sigma_hat: usize, rho_hat: usize, n: usize) -> f64 {
    let s = sigma_hat as f64 / n as f64;
    let r = rho_hat as f64 / n as f64;
    s.min(r)
}

impl HypergraphStats {
    pub fn sparsity(&self) -> f64 {
        sparsity(self.sigma_hat, self.rho_hat, self.n)
    }
}

/// `prod_{i=1}^{p-1} (1 - i * unit / n)`, clamped to zero as soon as a
/// factor is non-positive. Long products switch to summed logarithms to
/// avoid rounding drift.
fn collision_free_product(n: f64, unit: f64, p: usize) -> f64 {
    if p <= 1 {
        return 1.0;
    }
    let factors = p - 1;
    if factors <= 1000 {
        let mut acc = 1.0;
        for i in 1..=factors {
            let factor = 1.0 - (i as f64) * unit / n;
            if factor <= 0.0 {
                return 0.0;
            }
            acc *= factor;
        }
        acc
    } else {
        let mut log_acc = 0.0;
        for i in 1..=factors {
            let x = (i as f64) * unit / n;
            if x >= 1.0 {
                return 0.0;
            }
            log_acc += (-x).ln_1p();
        }
        log_acc.exp()
    }
}

/// Lower bound on the probability that `p` workers draw `p` distinct
/// samples from `n` training triples: `prod_{i=1}^{p-1} (1 - i/n)`.
pub fn prob_distinct_samples(n: usize, p: usize) -> f64 {
    collision_free_product(n as f64, 1.0, p)
}

/// Lower bound on the probability that `p` concurrent samples share no
/// relation: `prod_{i=1}^{p-1} (1 - i * sigma_hat / n)`, zero whenever
/// `p >= n / sigma_hat + 1` (some relation must then repeat).
pub fn prob_no_relation_collision(n: usize, p: usize, sigma_hat: usize) -> f64 {
    if p as f64 >= n as f64 / sigma_hat as f64 + 1.0 {
        return 0.0;
    }
    collision_free_product(n as f64, sigma_hat as f64, p)
}

/// Lower bound on the probability that `p` concurrent samples share no
/// entity: `prod_{i=1}^{p-1} (1 - i * rho_hat / n)`.
pub fn prob_no_entity_collision(n: usize, p: usize, rho_hat: usize) -> f64 {
    if p as f64 >= n as f64 / rho_hat as f64 + 1.0 {
        return 0.0;
    }
    collision_free_product(n as f64, rho_hat as f64, p)
}

/// The three analytic collision-freedom bounds for a worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionProbabilities {
    pub workers: usize,
    pub p_distinct: f64,
    pub p_no_relation: f64,
    pub p_no_entity: f64,
}

impl CollisionProbabilities {
    pub fn from_stats(stats: &HypergraphStats, workers: usize) -> Self {
        CollisionProbabilities {
            workers,
            p_distinct: prob_distinct_samples(stats.n, workers),
            p_no_relation: prob_no_relation_collision(stats.n, workers, stats.sigma_hat),
            p_no_entity: prob_no_entity_collision(stats.n, workers, stats.rho_hat),
        }
    }
}

/// Empirical counterpart of the analytic probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionSimResult {
    pub workers: usize,
    pub trials: usize,
    pub empirical_distinct: f64,
    pub empirical_no_relation: f64,
    pub empirical_no_entity: f64,
    pub stderr_distinct: f64,
    pub stderr_no_relation: f64,
    pub stderr_no_entity: f64,
}

fn binomial_stderr(p_hat: f64, trials: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
}

/// Monte-Carlo estimate of the collision probabilities.
///
/// Each trial draws `p` samples exactly as a training iteration would
/// (uniform positive line, fair-coin corruption) and records whether the
/// sample indices are pairwise distinct, whether the relations are, and
/// whether the 3-entity sets `{head, tail, corrupted}` are pairwise
/// disjoint.
pub fn simulate_collisions(
    graph: &KnowledgeGraph,
    p: usize,
    trials: usize,
    rng: &mut WorkerRng,
) -> CollisionSimResult {
    let n = graph.n_train();
    let mut distinct_hits = 0usize;
    let mut relation_hits = 0usize;
    let mut entity_hits = 0usize;

    let mut indices = vec![0usize; p];
    let mut relations = vec![0usize; p];
    let mut entity_sets: Vec<[usize; 3]> = vec![[0; 3]; p];

    for _ in 0..trials {
        for slot in 0..p {
            let idx = rng.gen_range(0..n);
            let positive = graph.train()[idx];
            let sample = corrupt(positive, graph, rng, false)
                .expect("corruption of a valid graph cannot fail");
            indices[slot] = idx;
            relations[slot] = positive.relation;
            entity_sets[slot] = [
                positive.head,
                positive.tail,
                sample.corrupted_entity(),
            ];
        }
        if pairwise_distinct(&indices) {
            distinct_hits += 1;
        }
        if pairwise_distinct(&relations) {
            relation_hits += 1;
        }
        if entity_sets_disjoint(&entity_sets) {
            entity_hits += 1;
        }
    }

    let freq = |hits: usize| hits as f64 / trials as f64;
    let (pd, pr, pe) = (freq(distinct_hits), freq(relation_hits), freq(entity_hits));
    CollisionSimResult {
        workers: p,
        trials,
        empirical_distinct: pd,
        empirical_no_relation: pr,
        empirical_no_entity: pe,
        stderr_distinct: binomial_stderr(pd, trials),
        stderr_no_relation: binomial_stderr(pr, trials),
        stderr_no_entity: binomial_stderr(pe, trials),
    }
}

fn pairwise_distinct(values: &[usize]) -> bool {
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            if values[i] == values[j] {
                return false;
            }
        }
    }
    true
}

fn entity_sets_disjoint(sets: &[[usize; 3]]) -> bool {
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            for a in sets[i] {
                if sets[j].contains(&a) {
                    return false;
                }
            }
        }
    }
    true
}
