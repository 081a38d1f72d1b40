//! Triple corpora: TSV ingestion, vocabularies, membership indices, and
//! seeded synthetic graphs for tests and benchmarks.
//!
//! Input files are UTF-8 TSV with one triple per line and exactly three
//! tab-separated columns, no header. Both common column layouts are
//! supported: `(head, relation, tail)` and the `(head, tail, relation)`
//! layout used by widely circulated WN18/FB15k copies. Labels are opaque
//! byte strings; no normalization is applied.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while loading or constructing graphs.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: expected 3 tab-separated fields")]
    MalformedLine { path: PathBuf, line: usize },
    #[error("training split is empty")]
    EmptyTrain,
    #[error("triple ({head}, {relation}, {tail}) is out of range for a graph with {n_entities} entities and {n_relations} relations")]
    IdOutOfRange {
        head: usize,
        relation: usize,
        tail: usize,
        n_entities: usize,
        n_relations: usize,
    },
    #[error("synthetic graph requires n_e >= 2, n_r >= 1, n >= 1")]
    SynthTooSmall,
    #[error("requested {requested} distinct triples but only {capacity} are possible")]
    SynthTooDense { requested: usize, capacity: usize },
}

/// One fact: head entity, relation, tail entity, as dense integer ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple { head, relation, tail }
    }

    /// The entity occupying `side`.
    pub fn entity(&self, side: Side) -> usize {
        match side {
            Side::Head => self.head,
            Side::Tail => self.tail,
        }
    }

    /// Copy of `self` with the entity at `side` replaced.
    pub fn with_entity(mut self, side: Side, entity: usize) -> Self {
        match side {
            Side::Head => self.head = entity,
            Side::Tail => self.tail = entity,
        }
        self
    }
}

/// Which entity slot of a triple an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Head => Side::Tail,
            Side::Tail => Side::Head,
        }
    }
}

/// Column layout of a triple file.
///
/// `Htr` (head, tail, relation) is the layout of the most common WN18 and
/// FB15k redistributions and is the default everywhere; `Hrt` matches the
/// original benchmark release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnOrder {
    Hrt,
    Htr,
}

impl FromStr for ColumnOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hrt" => Ok(ColumnOrder::Hrt),
            "htr" => Ok(ColumnOrder::Htr),
            other => Err(format!("unknown column order `{other}` (expected hrt or htr)")),
        }
    }
}

impl fmt::Display for ColumnOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnOrder::Hrt => "hrt",
            ColumnOrder::Htr => "htr",
        })
    }
}

/// A raw string triple in (head, relation, tail) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Dataset split names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Bidirectional label/id maps for entities and relations.
///
/// Ids are dense `0..n`, assigned in first-occurrence order, so reloading
/// the same files always yields the same ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    entity_labels: Vec<String>,
    relation_labels: Vec<String>,
    entity_index: HashMap<String, usize>,
    relation_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn n_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn entity_id(&self, label: &str) -> Option<usize> {
        self.entity_index.get(label).copied()
    }

    pub fn relation_id(&self, label: &str) -> Option<usize> {
        self.relation_index.get(label).copied()
    }

    pub fn entity_label(&self, id: usize) -> &str {
        &self.entity_labels[id]
    }

    pub fn relation_label(&self, id: usize) -> &str {
        &self.relation_labels[id]
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relation_labels
    }

    fn intern_entity(&mut self, label: &str) -> usize {
        if let Some(&id) = self.entity_index.get(label) {
            return id;
        }
        let id = self.entity_labels.len();
        self.entity_labels.push(label.to_owned());
        self.entity_index.insert(label.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, label: &str) -> usize {
        if let Some(&id) = self.relation_index.get(label) {
            return id;
        }
        let id = self.relation_labels.len();
        self.relation_labels.push(label.to_owned());
        self.relation_index.insert(label.to_owned(), id);
        id
    }
}

/// A vocabulary-mapped triple store with train/valid/test splits and a
/// membership index over their union.
///
/// Duplicate training lines are kept in `train` (they reweight uniform
/// sampling); the membership index deduplicates. The graph is immutable
/// after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    vocab: Vocabulary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    /// (head, relation) -> sorted distinct tails, over all splits.
    tails_by_head_rel: HashMap<(usize, usize), Vec<usize>>,
    /// (tail, relation) -> sorted distinct heads, over all splits.
    heads_by_tail_rel: HashMap<(usize, usize), Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }

    /// Number of training triples (counting duplicates).
    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// True iff `t` occurs in train, valid, or test.
    pub fn contains(&self, t: &Triple) -> bool {
        self.tails_by_head_rel
            .get(&(t.head, t.relation))
            .is_some_and(|tails| tails.binary_search(&t.tail).is_ok())
    }

    /// Distinct known tails for `(head, relation)` across all splits.
    pub fn known_tails(&self, head: usize, relation: usize) -> &[usize] {
        self.tails_by_head_rel
            .get(&(head, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Distinct known heads for `(tail, relation)` across all splits.
    pub fn known_heads(&self, tail: usize, relation: usize) -> &[usize] {
        self.heads_by_tail_rel
            .get(&(tail, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Known entities completing `triple` with the entity at `side` removed.
    pub fn known_completions(&self, triple: &Triple, side: Side) -> &[usize] {
        match side {
            Side::Head => self.known_heads(triple.tail, triple.relation),
            Side::Tail => self.known_tails(triple.head, triple.relation),
        }
    }

    /// Assemble a graph from already-mapped triples, validating every id
    /// against `vocab` and building the membership index.
    pub fn from_parts(
        vocab: Vocabulary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self, DataError> {
        if train.is_empty() {
            return Err(DataError::EmptyTrain);
        }
        let (n_e, n_r) = (vocab.n_entities(), vocab.n_relations());
        for t in train.iter().chain(&valid).chain(&test) {
            if t.head >= n_e || t.tail >= n_e || t.relation >= n_r {
                return Err(DataError::IdOutOfRange {
                    head: t.head,
                    relation: t.relation,
                    tail: t.tail,
                    n_entities: n_e,
                    n_relations: n_r,
                });
            }
        }
        let mut graph = KnowledgeGraph {
            vocab,
            train,
            valid,
            test,
            tails_by_head_rel: HashMap::new(),
            heads_by_tail_rel: HashMap::new(),
        };
        graph.build_index();
        Ok(graph)
    }

    fn build_index(&mut self) {
        for t in self.train.iter().chain(&self.valid).chain(&self.test) {
            self.tails_by_head_rel
                .entry((t.head, t.relation))
                .or_default()
                .push(t.tail);
            self.heads_by_tail_rel
                .entry((t.tail, t.relation))
                .or_default()
                .push(t.head);
        }
        for tails in self.tails_by_head_rel.values_mut() {
            tails.sort_unstable();
            tails.dedup();
        }
        for heads in self.heads_by_tail_rel.values_mut() {
            heads.sort_unstable();
            heads.dedup();
        }
    }

    /// Write one split back out as TSV in the requested column order.
    pub fn export_tsv<W: Write>(
        &self,
        split: Split,
        order: ColumnOrder,
        mut w: W,
    ) -> io::Result<()> {
        for t in self.split(split) {
            let h = self.vocab.entity_label(t.head);
            let r = self.vocab.relation_label(t.relation);
            let tl = self.vocab.entity_label(t.tail);
            match order {
                ColumnOrder::Hrt => writeln!(w, "{h}\t{r}\t{tl}")?,
                ColumnOrder::Htr => writeln!(w, "{h}\t{tl}\t{r}")?,
            }
        }
        Ok(())
    }

    /// Load a graph from TSV files. `valid`/`test` are optional.
    pub fn load(
        train: &Path,
        valid: Option<&Path>,
        test: Option<&Path>,
        order: ColumnOrder,
    ) -> Result<Self, DataError> {
        let train_raw = load_triples(train, order)?;
        let valid_raw = match valid {
            Some(p) => load_triples(p, order)?,
            None => Vec::new(),
        };
        let test_raw = match test {
            Some(p) => load_triples(p, order)?,
            None => Vec::new(),
        };
        build_graph(&train_raw, &valid_raw, &test_raw)
    }
}

/// Read raw string triples from a TSV file, permuting columns to
/// (head, relation, tail).
///
/// Empty lines are skipped. A line without exactly three tab-separated
/// fields is an error carrying its 1-based line number.
pub fn load_triples(path: &Path, order: ColumnOrder) -> Result<Vec<RawTriple>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_triples(BufReader::new(file), order, path)
}

fn parse_triples<R: Read>(
    reader: BufReader<R>,
    order: ColumnOrder,
    path: &Path,
) -> Result<Vec<RawTriple>, DataError> {
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(a), Some(b), Some(c), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(DataError::MalformedLine {
                path: path.to_owned(),
                line: idx + 1,
            });
        };
        let (head, relation, tail) = match order {
            ColumnOrder::Hrt => (a, b, c),
            ColumnOrder::Htr => (a, c, b),
        };
        triples.push(RawTriple {
            head: head.to_owned(),
            relation: relation.to_owned(),
            tail: tail.to_owned(),
        });
    }
    Ok(triples)
}

/// Build a vocabulary-mapped graph from raw splits.
///
/// Ids are assigned in first-occurrence order scanning train, then valid,
/// then test. An empty training split is an error.
pub fn build_graph(
    train: &[RawTriple],
    valid: &[RawTriple],
    test: &[RawTriple],
) -> Result<KnowledgeGraph, DataError> {
    if train.is_empty() {
        return Err(DataError::EmptyTrain);
    }
    let mut vocab = Vocabulary::default();
    let map = |raws: &[RawTriple], vocab: &mut Vocabulary| {
        raws.iter()
            .map(|raw| Triple {
                head: vocab.intern_entity(&raw.head),
                relation: vocab.intern_relation(&raw.relation),
                tail: vocab.intern_entity(&raw.tail),
            })
            .collect::<Vec<_>>()
    };
    let train = map(train, &mut vocab);
    let valid = map(valid, &mut vocab);
    let test = map(test, &mut vocab);
    KnowledgeGraph::from_parts(vocab, train, valid, test)
}

/// Generate a deterministic graph of `n` distinct training triples sampled
/// uniformly over `n_e * n_e * n_r` combinations.
///
/// Entities are labeled `e0..`, relations `r0..`; every label exists in the
/// vocabulary even if no sampled triple uses it. All triples land in the
/// training split.
pub fn synth_graph(n_e: usize, n_r: usize, n: usize, seed: u64) -> Result<KnowledgeGraph, DataError> {
    if n_e < 2 || n_r < 1 || n < 1 {
        return Err(DataError::SynthTooSmall);
    }
    let capacity = n_e
        .checked_mul(n_e)
        .and_then(|c| c.checked_mul(n_r))
        .unwrap_or(usize::MAX);
    if n > capacity {
        return Err(DataError::SynthTooDense {
            requested: n,
            capacity,
        });
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n);
    if n * 2 <= capacity {
        // Sparse request: rejection sampling.
        let mut seen = HashSet::with_capacity(n);
        while train.len() < n {
            let t = Triple {
                head: rng.gen_range(0..n_e),
                relation: rng.gen_range(0..n_r),
                tail: rng.gen_range(0..n_e),
            };
            if seen.insert(t) {
                train.push(t);
            }
        }
    } else {
        // Dense request: enumerate and take a partial Fisher-Yates shuffle.
        let mut all: Vec<Triple> = (0..n_e)
            .flat_map(|h| {
                (0..n_r).flat_map(move |r| (0..n_e).map(move |t| Triple::new(h, r, t)))
            })
            .collect();
        for i in 0..n {
            let j = rng.gen_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(n);
        train = all;
    }

    let mut vocab = Vocabulary::default();
    for e in 0..n_e {
        vocab.intern_entity(&format!("e{e}"));
    }
    for r in 0..n_r {
        vocab.intern_relation(&format!("r{r}"));
    }
    KnowledgeGraph::from_parts(vocab, train, Vec::new(), Vec::new())
}
