//! The shared, element-addressable parameter bank.
//!
//! Parameters live in [`SharedMatrix`] cells backed by `AtomicU64` holding
//! `f64` bits. Loads and stores use relaxed ordering, which on mainstream
//! hardware compiles to plain moves: a single element can never tear, but
//! a whole-row read may interleave elements written by different workers.
//! That is precisely the contract lock-free training relies on: workers
//! never block, and the sparsity of the corpus keeps conflicting writes
//! rare.
//!
//! [`SharedMatrix::add`] is a read-modify-write without atomicity across
//! the pair (a concurrent update can be lost), the same behavior as a
//! plain `x -= eta * g` in unsynchronized C. [`SharedMatrix::accumulate`]
//! is a CAS loop for sums that must never lose an increment, used by the
//! AdaGrad accumulators.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::kgdata::{KnowledgeGraph, Vocabulary};
use crate::models::{ModelError, ModelKind};
use crate::sampling::WorkerRng;

use super::{TrainConfig, TrainError};

/// Stream index reserved for parameter initialization so that worker 0's
/// sampling stream stays untouched by init draws.
const INIT_STREAM: u64 = u64::MAX;

/// A rows-by-dim matrix of `f64` cells shared across training workers.
pub struct SharedMatrix {
    rows: usize,
    dim: usize,
    data: Box<[AtomicU64]>,
}

impl SharedMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        let data = (0..rows * dim)
            .map(|_| AtomicU64::new(0.0f64.to_bits()))
            .collect();
        SharedMatrix { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn cell(&self, row: usize, k: usize) -> &AtomicU64 {
        debug_assert!(row < self.rows && k < self.dim);
        &self.data[row * self.dim + k]
    }

    #[inline]
    pub fn get(&self, row: usize, k: usize) -> f64 {
        f64::from_bits(self.cell(row, k).load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, row: usize, k: usize, value: f64) {
        self.cell(row, k).store(value.to_bits(), Ordering::Relaxed);
    }

    /// Unsynchronized `x += delta`: concurrent adds to the same element
    /// may lose one of the updates, by design.
    #[inline]
    pub fn add(&self, row: usize, k: usize, delta: f64) {
        let cell = self.cell(row, k);
        let v = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((v + delta).to_bits(), Ordering::Relaxed);
    }

    /// Lock-free `x += delta` via compare-and-swap; never loses an
    /// increment. Returns the post-update value.
    #[inline]
    pub fn accumulate(&self, row: usize, k: usize, delta: f64) -> f64 {
        let cell = self.cell(row, k);
        let mut current = cell.load(Ordering::Relaxed);
        loop {
            let next = f64::from_bits(current) + delta;
            match cell.compare_exchange_weak(
                current,
                next.to_bits(),
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => return next,
                Err(seen) => current = seen,
            }
        }
    }

    pub fn read_row_into(&self, row: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim);
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.get(row, k);
        }
    }

    pub fn write_row(&self, row: usize, values: &[f64]) {
        assert_eq!(values.len(), self.dim);
        for (k, &v) in values.iter().enumerate() {
            self.set(row, k, v);
        }
    }

    pub fn add_row(&self, row: usize, deltas: &[f64]) {
        assert_eq!(deltas.len(), self.dim);
        for (k, &d) in deltas.iter().enumerate() {
            self.add(row, k, d);
        }
    }

    pub fn row_norm(&self, row: usize) -> f64 {
        (0..self.dim)
            .map(|k| {
                let v = self.get(row, k);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale a row to unit L2 norm in place. Reads and writes race with
    /// concurrent updates under the element contract.
    pub fn normalize_row(&self, row: usize) -> Result<(), ModelError> {
        let norm = self.row_norm(row);
        if norm == 0.0 {
            return Err(ModelError::ZeroVector);
        }
        if !norm.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if norm == 1.0 {
            return Ok(());
        }
        for k in 0..self.dim {
            self.set(row, k, self.get(row, k) / norm);
        }
        Ok(())
    }

    /// Snapshot the matrix into a flat row-major vector.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|cell| f64::from_bits(cell.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn bit_eq(&self, other: &SharedMatrix) -> bool {
        self.rows == other.rows
            && self.dim == other.dim
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }

    fn from_rows(rows: Vec<Vec<f64>>, dim: usize) -> Self {
        let m = SharedMatrix::zeros(rows.len(), dim);
        for (i, row) in rows.iter().enumerate() {
            m.write_row(i, row);
        }
        m
    }
}

impl std::fmt::Debug for SharedMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SharedMatrix")
            .field("rows", &self.rows)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// Entity vectors, relation vectors, and (for TransH) relation hyperplane
/// normals, shared across workers for the duration of training.
#[derive(Debug)]
pub struct EmbeddingStore {
    dim: usize,
    entities: SharedMatrix,
    relations: SharedMatrix,
    normals: Option<SharedMatrix>,
}

impl EmbeddingStore {
    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn bit_eq(&self, other: &EmbeddingStore) -> bool {
        self.dim == other.dim
            && self.entities.bit_eq(&other.entities)
            && self.relations.bit_eq(&other.relations)
            && match (&self.normals, &other.normals) {
                (Some(a), Some(b)) => a.bit_eq(b),
                (None, None) => true,
                _ => false,
            }
    }

    /// True iff every element of every matrix is finite.
    pub fn all_finite(&self) -> bool {
        let finite = |m: &SharedMatrix| m.to_vec().iter().all(|x| x.is_finite());
        finite(&self.entities)
            && finite(&self.relations)
            && self.normals.as_ref().is_none_or(finite)
    }
}

/// Initialize a store for `graph` from the seed in `config`.
///
/// Entity and relation vectors are drawn uniformly from
/// `(-6/sqrt(d), +6/sqrt(d))`; relation vectors are normalized once here
/// and never re-normalized during training. TransH hyperplane normals are
/// drawn the same way and unit-normalized. Deterministic for a fixed seed.
pub fn init_store(config: &TrainConfig, graph: &KnowledgeGraph) -> EmbeddingStore {
    let d = config.dim;
    let bound = 6.0 / (d as f64).sqrt();
    let mut rng = WorkerRng::new(config.seed, INIT_STREAM);
    let draw_row = |rng: &mut WorkerRng| -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-bound..bound)).collect()
    };

    let entities = SharedMatrix::zeros(graph.n_entities(), d);
    for row in 0..graph.n_entities() {
        entities.write_row(row, &draw_row(&mut rng));
    }

    let relations = SharedMatrix::zeros(graph.n_relations(), d);
    for row in 0..graph.n_relations() {
        relations.write_row(row, &draw_row(&mut rng));
        // A zero draw has probability zero; fall back to a constant row
        // rather than poisoning the store if it ever happens.
        if relations.normalize_row(row).is_err() {
            relations.write_row(row, &vec![1.0 / (d as f64).sqrt(); d]);
        }
    }

    let normals = match config.model {
        ModelKind::TransE => None,
        ModelKind::TransH => {
            let m = SharedMatrix::zeros(graph.n_relations(), d);
            for row in 0..graph.n_relations() {
                m.write_row(row, &draw_row(&mut rng));
                if m.normalize_row(row).is_err() {
                    m.write_row(row, &vec![1.0 / (d as f64).sqrt(); d]);
                }
            }
            Some(m)
        }
    };

    EmbeddingStore {
        dim: d,
        entities,
        relations,
        normals,
    }
}

const ENTITY_FILE: &str = "entities.txt";
const RELATION_FILE: &str = "relations.txt";
const NORMAL_FILE: &str = "hyperplanes.txt";

/// Write the store under `dir` as one file per matrix.
///
/// Each file starts with a `<count> <dim>` header followed by one
/// `<label> <v_1> ... <v_d>` line per row. Values use the shortest decimal
/// form that parses back to the identical `f64`, so a save/load round trip
/// is bit-exact.
pub fn save_embeddings(
    store: &EmbeddingStore,
    vocab: &Vocabulary,
    dir: &Path,
) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(|source| TrainError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let write_matrix = |m: &SharedMatrix, labels: &[String], name: &str| -> Result<(), TrainError> {
        let path = dir.join(name);
        let io_err = |source| TrainError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        (|| {
            writeln!(w, "{} {}", m.rows(), m.dim())?;
            let mut row = vec![0.0; m.dim()];
            for (i, label) in labels.iter().enumerate() {
                m.read_row_into(i, &mut row);
                write!(w, "{label}")?;
                for v in &row {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        })()
        .map_err(io_err)
    };
    write_matrix(&store.entities, vocab.entity_labels(), ENTITY_FILE)?;
    write_matrix(&store.relations, vocab.relation_labels(), RELATION_FILE)?;
    if let Some(normals) = &store.normals {
        write_matrix(normals, vocab.relation_labels(), NORMAL_FILE)?;
    }
    Ok(())
}

/// Load a store saved by [`save_embeddings`], mapping rows back through
/// `vocab`. The hyperplane file is optional; when present it marks the
/// store as a TransH store.
pub fn load_embeddings(dir: &Path, vocab: &Vocabulary) -> Result<EmbeddingStore, TrainError> {
    let (entity_rows, d) = read_matrix(
        &dir.join(ENTITY_FILE),
        vocab.n_entities(),
        |label| vocab.entity_id(label),
        None,
    )?;
    let (relation_rows, d2) = read_matrix(
        &dir.join(RELATION_FILE),
        vocab.n_relations(),
        |label| vocab.relation_id(label),
        Some(d),
    )?;
    debug_assert_eq!(d, d2);
    let normal_path = dir.join(NORMAL_FILE);
    let normals = if normal_path.exists() {
        let (rows, _) = read_matrix(
            &normal_path,
            vocab.n_relations(),
            |label| vocab.relation_id(label),
            Some(d),
        )?;
        Some(SharedMatrix::from_rows(rows, d))
    } else {
        None
    };
    Ok(EmbeddingStore {
        dim: d,
        entities: SharedMatrix::from_rows(entity_rows, d),
        relations: SharedMatrix::from_rows(relation_rows, d),
        normals,
    })
}

fn read_matrix(
    path: &PathBuf,
    expected_rows: usize,
    id_of: impl Fn(&str) -> Option<usize>,
    expected_dim: Option<usize>,
) -> Result<(Vec<Vec<f64>>, usize), TrainError> {
    let io_err = |source| TrainError::Io {
        path: path.clone(),
        source,
    };
    let fmt_err = |line: usize, message: String| TrainError::Format {
        path: path.clone(),
        line,
        message,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines();

    let header = lines
        .next()
        .ok_or_else(|| fmt_err(1, "missing header".into()))?
        .map_err(io_err)?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| fmt_err(1, "header must be `<count> <dim>`".into()))?;
    let dim: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| fmt_err(1, "header must be `<count> <dim>`".into()))?;
    if count != expected_rows {
        return Err(fmt_err(
            1,
            format!("header declares {count} rows, vocabulary has {expected_rows}"),
        ));
    }
    if let Some(expected) = expected_dim {
        if dim != expected {
            return Err(fmt_err(
                1,
                format!("header declares dimension {dim}, expected {expected}"),
            ));
        }
    }

    let mut rows: Vec<Option<Vec<f64>>> = vec![None; expected_rows];
    let mut seen = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        // The label may contain spaces; values are the last `dim` tokens.
        let mut tail_tokens = Vec::with_capacity(dim);
        let mut rest = line.as_str();
        for _ in 0..dim {
            let Some(split_at) = rest.rfind(' ') else {
                return Err(fmt_err(lineno, format!("expected {dim} values after label")));
            };
            tail_tokens.push(&rest[split_at + 1..]);
            rest = &rest[..split_at];
        }
        tail_tokens.reverse();
        let label = rest;
        let mut values = Vec::with_capacity(dim);
        for tok in tail_tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| fmt_err(lineno, format!("bad float `{tok}`")))?;
            values.push(v);
        }
        let id = id_of(label)
            .ok_or_else(|| fmt_err(lineno, format!("label `{label}` not in vocabulary")))?;
        if rows[id].replace(values).is_some() {
            return Err(fmt_err(lineno, format!("duplicate label `{label}`")));
        }
        seen += 1;
    }
    if seen != expected_rows {
        return Err(fmt_err(
            0,
            format!("file has {seen} rows, expected {expected_rows}"),
        ));
    }
    let rows = rows.into_iter().map(Option::unwrap).collect();
    Ok((rows, dim))
}
