//! Link-prediction evaluation: entity ranking, Mean Rank, and Hits@10
//! under Raw and Filter settings.
//!
//! For every test triple, both the head and the tail are predicted: every
//! entity is substituted into the slot, scored, and the correct entity's
//! rank is `1 +` the number of candidates with strictly smaller score.
//! Ties therefore resolve optimistically, which keeps ranking
//! deterministic and independent of candidate order. The Filter setting
//! additionally ignores candidates that form a known triple (in train,
//! valid, or test) other than the test triple itself, so
//! `filtered_rank <= raw_rank` always.
//!
//! Evaluation is read-only over the store and embarrassingly parallel
//! over test triples; integer rank sums make the parallel result
//! bit-identical to a serial pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgdata::{KnowledgeGraph, Side, Triple};
use crate::models::{ModelKind, Similarity};
use crate::trainer::EmbeddingStore;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("store shape ({entities} entities, {relations} relations, dim {dim}) does not match graph ({graph_entities}, {graph_relations})")]
    ShapeMismatch {
        entities: usize,
        relations: usize,
        dim: usize,
        graph_entities: usize,
        graph_relations: usize,
    },
    #[error("TransH evaluation needs hyperplane normals in the store")]
    MissingHyperplanes,
}

/// Ranking setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    Raw,
    Filter,
}

/// Both ranks for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankResult {
    pub triple: Triple,
    pub side: Side,
    pub raw_rank: usize,
    pub filtered_rank: usize,
}

/// Aggregated link-prediction metrics over `2 * |test|` predictions.
/// Hits are percentages in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_rank_raw: f64,
    pub mean_rank_filtered: f64,
    pub hits10_raw: f64,
    pub hits10_filtered: f64,
    pub count: usize,
}

/// Immutable snapshot of the store used during ranking sweeps.
struct EvalView {
    dim: usize,
    n_entities: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
    normals: Option<Vec<f64>>,
    kind: ModelKind,
    sim: Similarity,
}

impl EvalView {
    fn build(
        store: &EmbeddingStore,
        graph: &KnowledgeGraph,
        kind: ModelKind,
        sim: Similarity,
    ) -> Result<Self, EvalError> {
        if store.entities().rows() != graph.n_entities()
            || store.relations().rows() != graph.n_relations()
        {
            return Err(EvalError::ShapeMismatch {
                entities: store.entities().rows(),
                relations: store.relations().rows(),
                dim: store.dim(),
                graph_entities: graph.n_entities(),
                graph_relations: graph.n_relations(),
            });
        }
        let normals = match kind {
            ModelKind::TransE => None,
            ModelKind::TransH => Some(
                store
                    .normals()
                    .ok_or(EvalError::MissingHyperplanes)?
                    .to_vec(),
            ),
        };
        Ok(EvalView {
            dim: store.dim(),
            n_entities: graph.n_entities(),
            entities: store.entities().to_vec(),
            relations: store.relations().to_vec(),
            normals,
            kind,
            sim,
        })
    }

    #[inline]
    fn entity(&self, id: usize) -> &[f64] {
        &self.entities[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    fn relation(&self, id: usize) -> &[f64] {
        &self.relations[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    fn normal(&self, id: usize) -> &[f64] {
        let normals = self.normals.as_ref().expect("TransH view has normals");
        &normals[id * self.dim..(id + 1) * self.dim]
    }

    /// Score with the candidate entity in `side`. `base` is the
    /// side-independent part precomputed by [`EvalView::base_for`].
    #[inline]
    fn candidate_score(&self, base: &[f64], triple: &Triple, side: Side, candidate: usize) -> f64 {
        let e = self.entity(candidate);
        let mut acc = 0.0;
        match self.kind {
            ModelKind::TransE => {
                // base = h + r (tail side) or r - t (head side).
                match side {
                    Side::Tail => {
                        for k in 0..self.dim {
                            let d = base[k] - e[k];
                            acc += term(d, self.sim);
                        }
                    }
                    Side::Head => {
                        for k in 0..self.dim {
                            let d = e[k] + base[k];
                            acc += term(d, self.sim);
                        }
                    }
                }
            }
            ModelKind::TransH => {
                let w = self.normal(triple.relation);
                let mut dot = 0.0;
                for k in 0..self.dim {
                    dot += w[k] * e[k];
                }
                // base already holds proj-side terms; the candidate enters
                // projected: e - (w.e) w.
                match side {
                    Side::Tail => {
                        for k in 0..self.dim {
                            let d = base[k] - (e[k] - dot * w[k]);
                            acc += term(d, self.sim);
                        }
                    }
                    Side::Head => {
                        for k in 0..self.dim {
                            let d = (e[k] - dot * w[k]) + base[k];
                            acc += term(d, self.sim);
                        }
                    }
                }
            }
        }
        acc
    }

    /// Precompute the part of the score not involving the candidate:
    /// `h + r` when predicting tails, `r - t` when predicting heads
    /// (entities projected first for TransH).
    fn base_for(&self, triple: &Triple, side: Side) -> Vec<f64> {
        let r = self.relation(triple.relation);
        let fixed = match side {
            Side::Tail => self.entity(triple.head),
            Side::Head => self.entity(triple.tail),
        };
        let mut base = vec![0.0; self.dim];
        match self.kind {
            ModelKind::TransE => {
                for k in 0..self.dim {
                    base[k] = match side {
                        Side::Tail => fixed[k] + r[k],
                        Side::Head => r[k] - fixed[k],
                    };
                }
            }
            ModelKind::TransH => {
                let w = self.normal(triple.relation);
                let mut dot = 0.0;
                for k in 0..self.dim {
                    dot += w[k] * fixed[k];
                }
                for k in 0..self.dim {
                    let proj = fixed[k] - dot * w[k];
                    base[k] = match side {
                        Side::Tail => proj + r[k],
                        Side::Head => r[k] - proj,
                    };
                }
            }
        }
        base
    }

    /// (raw_rank, filtered_rank) for one prediction.
    fn ranks(&self, graph: &KnowledgeGraph, triple: &Triple, side: Side) -> (usize, usize) {
        let base = self.base_for(triple, side);
        let correct = triple.entity(side);
        let correct_score = self.candidate_score(&base, triple, side, correct);
        let mut smaller_raw = 0usize;
        for candidate in 0..self.n_entities {
            if self.candidate_score(&base, triple, side, candidate) < correct_score {
                smaller_raw += 1;
            }
        }
        // Filtering removes known competitors; subtract the strictly
        // smaller ones instead of re-scanning all candidates.
        let mut smaller_known = 0usize;
        for &candidate in graph.known_completions(triple, side) {
            if candidate != correct
                && self.candidate_score(&base, triple, side, candidate) < correct_score
            {
                smaller_known += 1;
            }
        }
        (smaller_raw + 1, smaller_raw - smaller_known + 1)
    }
}

#[inline]
fn term(d: f64, sim: Similarity) -> f64 {
    match sim {
        Similarity::L1 => d.abs(),
        Similarity::L2 => d * d,
    }
}

/// Rank the correct entity of `triple` at `side` against all entities.
pub fn rank_one(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    triple: &Triple,
    side: Side,
    mode: RankMode,
    kind: ModelKind,
    sim: Similarity,
) -> Result<usize, EvalError> {
    let result = rank_pair(store, graph, triple, side, kind, sim)?;
    Ok(match mode {
        RankMode::Raw => result.raw_rank,
        RankMode::Filter => result.filtered_rank,
    })
}

/// Raw and filtered rank of one prediction in a single candidate sweep.
pub fn rank_pair(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    triple: &Triple,
    side: Side,
    kind: ModelKind,
    sim: Similarity,
) -> Result<RankResult, EvalError> {
    let view = EvalView::build(store, graph, kind, sim)?;
    let (raw_rank, filtered_rank) = view.ranks(graph, triple, side);
    Ok(RankResult {
        triple: *triple,
        side,
        raw_rank,
        filtered_rank,
    })
}

/// Evaluate the whole test split: head and tail predictions for every
/// test triple, aggregated into Mean Rank and Hits@10.
pub fn evaluate(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    kind: ModelKind,
    sim: Similarity,
) -> Result<EvalMetrics, EvalError> {
    if graph.test().is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    let view = EvalView::build(store, graph, kind, sim)?;
    let per_triple: Vec<[usize; 4]> = graph
        .test()
        .par_iter()
        .map(|triple| {
            let (raw_h, filt_h) = view.ranks(graph, triple, Side::Head);
            let (raw_t, filt_t) = view.ranks(graph, triple, Side::Tail);
            [raw_h, filt_h, raw_t, filt_t]
        })
        .collect();
    Ok(aggregate(&per_triple))
}

fn aggregate(per_triple: &[[usize; 4]]) -> EvalMetrics {
    let count = per_triple.len() * 2;
    let mut raw_sum = 0u64;
    let mut filt_sum = 0u64;
    let mut raw_hits = 0u64;
    let mut filt_hits = 0u64;
    for [raw_h, filt_h, raw_t, filt_t] in per_triple {
        raw_sum += (raw_h + raw_t) as u64;
        filt_sum += (filt_h + filt_t) as u64;
        raw_hits += u64::from(*raw_h <= 10) + u64::from(*raw_t <= 10);
        filt_hits += u64::from(*filt_h <= 10) + u64::from(*filt_t <= 10);
    }
    EvalMetrics {
        mean_rank_raw: raw_sum as f64 / count as f64,
        mean_rank_filtered: filt_sum as f64 / count as f64,
        hits10_raw: 100.0 * raw_hits as f64 / count as f64,
        hits10_filtered: 100.0 * filt_hits as f64 / count as f64,
        count,
    }
}
