//! Per-worker seeded sampling of positive triples and corrupted negatives.
//!
//! Every worker owns a [`WorkerRng`] derived from `(base_seed,
//! worker_index)`. Distinct indices yield distinct, reproducible streams,
//! so a single-threaded run replays its exact sample sequence and parallel
//! workers never share a pseudo-random sequence.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgdata::{KnowledgeGraph, Side, Triple};

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("negative sampling needs at least 2 entities, graph has {0}")]
    TooFewEntities(usize),
    #[error("no unknown negative found for ({head}, {relation}, {tail}) after {attempts} attempts")]
    ExhaustedNegatives {
        head: usize,
        relation: usize,
        tail: usize,
        attempts: usize,
    },
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream seed from a base seed and a stream index.
///
/// The mix is a SplitMix64 finalizer over the base seed offset by a
/// distinct gamma multiple per stream, so different indices land in
/// unrelated regions of the generator's seed space.
pub fn derive_seed(base_seed: u64, stream: u64) -> u64 {
    splitmix_mix(base_seed ^ stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// A worker-private pseudo-random generator with a reproducible,
/// per-worker stream.
#[derive(Debug, Clone)]
pub struct WorkerRng {
    rng: Xoshiro256PlusPlus,
    worker_index: u64,
}

impl WorkerRng {
    /// Seed the stream for `worker_index` under `base_seed`.
    pub fn new(base_seed: u64, worker_index: u64) -> Self {
        WorkerRng {
            rng: Xoshiro256PlusPlus::seed_from_u64(derive_seed(base_seed, worker_index)),
            worker_index,
        }
    }

    pub fn worker_index(&self) -> u64 {
        self.worker_index
    }
}

impl RngCore for WorkerRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// One SGD unit: a positive triple and its corrupted counterpart.
///
/// The negative differs from the positive in exactly one entity slot and
/// keeps the relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub positive: Triple,
    pub negative: Triple,
    pub corrupted_side: Side,
}

impl Sample {
    /// The replacement entity introduced by corruption.
    pub fn corrupted_entity(&self) -> usize {
        self.negative.entity(self.corrupted_side)
    }
}

/// Draw a training triple uniformly over training lines (duplicates
/// therefore weigh proportionally to their multiplicity).
pub fn sample_positive(graph: &KnowledgeGraph, rng: &mut WorkerRng) -> Triple {
    let n = graph.n_train();
    debug_assert!(n >= 1);
    graph.train()[rng.gen_range(0..n)]
}

/// Corrupt one entity slot of `positive`.
///
/// The side is a fair coin and the replacement is uniform over entities,
/// excluding the entity it replaces. With `avoid_known` the draw repeats
/// until the corrupted triple is absent from every split, erroring after
/// `100 * n_entities` attempts; by default known triples are accepted as
/// negatives, matching the usual training procedure (filtering is an
/// evaluation-time concern).
pub fn corrupt(
    positive: Triple,
    graph: &KnowledgeGraph,
    rng: &mut WorkerRng,
    avoid_known: bool,
) -> Result<Sample, SampleError> {
    let n_e = graph.n_entities();
    if n_e < 2 {
        return Err(SampleError::TooFewEntities(n_e));
    }
    let max_attempts = 100 * n_e;
    for _ in 0..max_attempts {
        let side = if rng.gen::<bool>() { Side::Head } else { Side::Tail };
        let original = positive.entity(side);
        let replacement = loop {
            let e = rng.gen_range(0..n_e);
            if e != original {
                break e;
            }
        };
        let negative = positive.with_entity(side, replacement);
        if !avoid_known || !graph.contains(&negative) {
            return Ok(Sample {
                positive,
                negative,
                corrupted_side: side,
            });
        }
    }
    Err(SampleError::ExhaustedNegatives {
        head: positive.head,
        relation: positive.relation,
        tail: positive.tail,
        attempts: max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::{build_graph, synth_graph, RawTriple};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn draws(base: u64, worker: u64, count: usize) -> Vec<u64> {
        let mut rng = WorkerRng::new(base, worker);
        (0..count).map(|_| rand::RngCore::next_u64(&mut rng)).collect()
    }

    #[test]
    fn distinct_workers_diverge() {
        assert_ne!(draws(7, 0, 100), draws(7, 1, 100));
    }

    #[test]
    fn same_worker_reproduces_stream() {
        assert_eq!(draws(7, 3, 1000), draws(7, 3, 1000));
    }

    #[test]
    fn eight_workers_pairwise_distinct() {
        let streams: Vec<_> = (0..8).map(|w| draws(42, w, 1000)).collect();
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_ne!(streams[i], streams[j], "workers {i} and {j} collided");
            }
        }
    }

    fn raw(h: &str, r: &str, t: &str) -> RawTriple {
        RawTriple {
            head: h.into(),
            relation: r.into(),
            tail: t.into(),
        }
    }

    #[test]
    fn single_triple_always_selected() {
        let g = build_graph(&[raw("a", "r", "b")], &[], &[]).unwrap();
        let mut rng = WorkerRng::new(1, 0);
        for _ in 0..50 {
            assert_eq!(sample_positive(&g, &mut rng), g.train()[0]);
        }
    }

    #[test]
    fn positive_sampling_is_uniform_over_lines() {
        let g = synth_graph(10, 1, 4, 3).unwrap();
        let mut rng = WorkerRng::new(5, 0);
        let mut counts: HashMap<Triple, usize> = HashMap::new();
        let draws = 40_000;
        for _ in 0..draws {
            *counts.entry(sample_positive(&g, &mut rng)).or_default() += 1;
        }
        for t in g.train() {
            let freq = counts[t] as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.02, "freq {freq} for {t:?}");
        }
    }

    #[test]
    fn duplicated_line_doubles_frequency() {
        let lines = vec![
            raw("a", "r", "b"),
            raw("a", "r", "b"),
            raw("c", "r", "d"),
            raw("e", "r", "f"),
        ];
        let g = build_graph(&lines, &[], &[]).unwrap();
        let mut rng = WorkerRng::new(9, 0);
        let dup = g.train()[0];
        let mut hits = 0usize;
        let draws = 40_000;
        for _ in 0..draws {
            if sample_positive(&g, &mut rng) == dup {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "duplicated freq {freq}");
    }

    #[test]
    fn two_entity_graph_forces_the_only_candidate() {
        let g = build_graph(&[raw("a", "r", "b")], &[], &[]).unwrap();
        let mut rng = WorkerRng::new(4, 0);
        let pos = g.train()[0];
        for _ in 0..100 {
            let s = corrupt(pos, &g, &mut rng, false).unwrap();
            match s.corrupted_side {
                Side::Head => assert_eq!(s.negative, Triple::new(1, 0, 1)),
                Side::Tail => assert_eq!(s.negative, Triple::new(0, 0, 0)),
            }
        }
    }

    #[test]
    fn corruption_side_is_a_fair_coin() {
        let g = synth_graph(20, 2, 50, 8).unwrap();
        let mut rng = WorkerRng::new(2, 0);
        let mut heads = 0usize;
        let draws = 10_000;
        for i in 0..draws {
            let pos = g.train()[i % g.n_train()];
            if corrupt(pos, &g, &mut rng, false).unwrap().corrupted_side == Side::Head {
                heads += 1;
            }
        }
        let frac = heads as f64 / draws as f64;
        assert!((frac - 0.5).abs() <= 0.02, "head fraction {frac}");
    }

    #[test]
    fn avoid_known_on_dense_graph_errors() {
        // Every possible triple over 2 entities and 1 relation is present.
        let lines = vec![
            raw("a", "r", "a"),
            raw("a", "r", "b"),
            raw("b", "r", "a"),
            raw("b", "r", "b"),
        ];
        let g = build_graph(&lines, &[], &[]).unwrap();
        let mut rng = WorkerRng::new(1, 0);
        let err = corrupt(g.train()[0], &g, &mut rng, true).unwrap_err();
        assert!(matches!(err, SampleError::ExhaustedNegatives { .. }));
    }

    #[test]
    fn avoid_known_skips_known_triples() {
        let g = synth_graph(10, 2, 30, 6).unwrap();
        let mut rng = WorkerRng::new(3, 0);
        for i in 0..500 {
            let pos = g.train()[i % g.n_train()];
            let s = corrupt(pos, &g, &mut rng, true).unwrap();
            assert!(!g.contains(&s.negative));
        }
    }

    proptest! {
        #[test]
        fn corruption_changes_exactly_one_slot(seed in 0u64..500) {
            let g = synth_graph(15, 3, 40, 17).unwrap();
            let mut rng = WorkerRng::new(seed, 0);
            let pos = sample_positive(&g, &mut rng);
            let s = corrupt(pos, &g, &mut rng, false).unwrap();
            prop_assert_eq!(s.positive, pos);
            prop_assert_eq!(s.negative.relation, pos.relation);
            match s.corrupted_side {
                Side::Head => {
                    prop_assert_ne!(s.negative.head, pos.head);
                    prop_assert_eq!(s.negative.tail, pos.tail);
                }
                Side::Tail => {
                    prop_assert_ne!(s.negative.tail, pos.tail);
                    prop_assert_eq!(s.negative.head, pos.head);
                }
            }
        }
    }
}
