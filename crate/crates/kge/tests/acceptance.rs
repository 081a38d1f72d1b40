//! Acceptance suite: one test per criterion, each printing a PASS / SKIP
//! line (run with `cargo test --test acceptance -- --nocapture` to see
//! them). Criteria that need the WN18 or FB15k files skip with a warning
//! when the datasets are not present; point `KGE_DATA_DIR` at a directory
//! containing `WN18/` and `FB15k/` to enable them.

#![allow(clippy::needless_range_loop)]

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use kge::analysis::{hypergraph_stats, prob_distinct_samples, simulate_collisions};
use kge::evaluator::{evaluate, rank_pair, RankMode};
use kge::kgdata::{load_triples, synth_graph, ColumnOrder, KnowledgeGraph, Side, Triple};
use kge::models::{
    grad_transe, grad_transh, normalize, GradientBundle, ModelKind, SampleVectors, Similarity,
};
use kge::sampling::WorkerRng;
use kge::trainer::{
    save_embeddings, train, NormPolicy, Optimizer, TrainConfig, WorkerDelay,
};

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

// ---------------------------------------------------------------------
// Dataset discovery
// ---------------------------------------------------------------------

struct Dataset {
    name: &'static str,
    train: PathBuf,
    valid: PathBuf,
    test: PathBuf,
    order: ColumnOrder,
}

fn data_root() -> PathBuf {
    match std::env::var_os("KGE_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Decide the column layout by counting distinct values per column; the
/// relation column is by far the smallest in both benchmark corpora.
fn detect_order(train: &Path) -> ColumnOrder {
    let Ok(text) = std::fs::read_to_string(train) else {
        return ColumnOrder::Htr;
    };
    let mut distinct = [HashSet::new(), HashSet::new(), HashSet::new()];
    for line in text.lines().take(5000) {
        let mut fields = line.split('\t');
        for set in distinct.iter_mut() {
            if let Some(f) = fields.next() {
                set.insert(f.to_owned());
            }
        }
    }
    if distinct[1].len() <= distinct[2].len() {
        ColumnOrder::Hrt
    } else {
        ColumnOrder::Htr
    }
}

fn find_dataset(name: &'static str, dirs: &[&str], stems: &[&str]) -> Option<Dataset> {
    let root = data_root();
    for dir in dirs {
        let base = root.join(dir);
        for stem in stems {
            let train = base.join(format!("{stem}train.txt"));
            let valid = base.join(format!("{stem}valid.txt"));
            let test = base.join(format!("{stem}test.txt"));
            if train.exists() && valid.exists() && test.exists() {
                let order = detect_order(&train);
                return Some(Dataset {
                    name,
                    train,
                    valid,
                    test,
                    order,
                });
            }
        }
    }
    None
}

fn wn18() -> Option<Dataset> {
    find_dataset(
        "WN18",
        &["WN18", "wn18", "wordnet-mlj12"],
        &["", "wn18-", "wordnet-mlj12-"],
    )
}

fn fb15k() -> Option<Dataset> {
    find_dataset(
        "FB15k",
        &["FB15k", "fb15k", "FB15K"],
        &["", "fb15k-", "freebase_mtr100_mte100-"],
    )
}

fn load(ds: &Dataset) -> KnowledgeGraph {
    let graph = KnowledgeGraph::load(&ds.train, Some(&ds.valid), Some(&ds.test), ds.order)
        .unwrap_or_else(|e| panic!("failed to load {}: {e}", ds.name));
    // Sanity-check the published corpus shapes.
    match ds.name {
        "WN18" => {
            assert_eq!(graph.n_train(), 141_442, "unexpected WN18 train count");
            assert_eq!(graph.n_entities(), 40_943, "unexpected WN18 entity count");
            assert_eq!(graph.n_relations(), 18, "unexpected WN18 relation count");
        }
        "FB15k" => {
            assert_eq!(graph.n_train(), 483_142, "unexpected FB15k train count");
            assert_eq!(graph.n_entities(), 14_951, "unexpected FB15k entity count");
            assert_eq!(graph.n_relations(), 1_345, "unexpected FB15k relation count");
        }
        _ => {}
    }
    graph
}

fn skip(criterion: &str, dataset: &str) {
    println!("ACCEPTANCE {criterion}: SKIP ({dataset} files not found under {})", data_root().display());
    eprintln!("warning: ACCEPTANCE {criterion} skipped; {dataset} not available");
}

fn physical_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn wn18_transe_config() -> TrainConfig {
    TrainConfig::default()
        .with_model(ModelKind::TransE)
        .with_sim(Similarity::L1)
        .with_dim(20)
        .with_margin(3.0)
        .with_rate(0.01)
        .with_epochs(1000)
        .with_seed(42)
}

fn fb15k_transe_config() -> TrainConfig {
    TrainConfig::default()
        .with_model(ModelKind::TransE)
        .with_sim(Similarity::L1)
        .with_dim(100)
        .with_margin(4.0)
        .with_rate(0.001)
        .with_epochs(1000)
        .with_seed(42)
}

/// Synthetic graph with the last `held_out` triples moved to the test split.
fn split_synth(n_e: usize, n_r: usize, n: usize, held_out: usize, seed: u64) -> KnowledgeGraph {
    let g = synth_graph(n_e, n_r, n, seed).unwrap();
    let mut train = g.train().to_vec();
    let test = train.split_off(n - held_out);
    KnowledgeGraph::from_parts(g.vocab().clone(), train, Vec::new(), test).unwrap()
}

// ---------------------------------------------------------------------
// 1-6: dataset-scale quality, parity, speedup, statistics
// ---------------------------------------------------------------------

#[test]
fn acceptance_01_wn18_transe_quality() {
    let Some(ds) = wn18() else {
        return skip("1 (WN18 TransE quality)", "WN18");
    };
    let graph = load(&ds);
    let (store, _) = train(&graph, &wn18_transe_config()).unwrap();
    let metrics = evaluate(&store, &graph, ModelKind::TransE, Similarity::L1).unwrap();
    println!(
        "ACCEPTANCE 1 (WN18 TransE quality): hits@10(filter) = {:.1} (need >= 60.0), \
         mean rank(filter) = {:.0} (need <= 260)",
        metrics.hits10_filtered, metrics.mean_rank_filtered
    );
    assert!(metrics.hits10_filtered >= 60.0);
    assert!(metrics.mean_rank_filtered <= 260.0);
    println!("ACCEPTANCE 1 (WN18 TransE quality): PASS");
}

#[test]
fn acceptance_02_wn18_parallel_parity() {
    let Some(ds) = wn18() else {
        return skip("2 (WN18 parallel parity)", "WN18");
    };
    let graph = load(&ds);
    let (serial_store, _) = train(&graph, &wn18_transe_config()).unwrap();
    let serial = evaluate(&serial_store, &graph, ModelKind::TransE, Similarity::L1).unwrap();
    for p in [8usize, 16] {
        let (store, _) = train(&graph, &wn18_transe_config().with_threads(p)).unwrap();
        let metrics = evaluate(&store, &graph, ModelKind::TransE, Similarity::L1).unwrap();
        let gap = (metrics.hits10_filtered - serial.hits10_filtered).abs();
        println!(
            "ACCEPTANCE 2 (parallel parity): p={p} hits@10(filter) = {:.1} vs serial {:.1}, \
             gap {:.2} (need <= 3.5)",
            metrics.hits10_filtered, serial.hits10_filtered, gap
        );
        assert!(gap <= 3.5);
    }
    println!("ACCEPTANCE 2 (WN18 parallel parity): PASS");
}

#[test]
fn acceptance_03_fb15k_transe_quality() {
    let Some(ds) = fb15k() else {
        return skip("3 (FB15k TransE quality)", "FB15k");
    };
    let graph = load(&ds);
    let config = fb15k_transe_config().with_threads(physical_threads());
    let (store, _) = train(&graph, &config).unwrap();
    let metrics = evaluate(&store, &graph, ModelKind::TransE, Similarity::L1).unwrap();
    println!(
        "ACCEPTANCE 3 (FB15k TransE quality): hits@10(filter) = {:.1} (need >= 55.0), \
         mean rank(filter) = {:.0} (need <= 95)",
        metrics.hits10_filtered, metrics.mean_rank_filtered
    );
    assert!(metrics.hits10_filtered >= 55.0);
    assert!(metrics.mean_rank_filtered <= 95.0);
    println!("ACCEPTANCE 3 (FB15k TransE quality): PASS");
}

#[test]
fn acceptance_04_fb15k_speedup() {
    let Some(ds) = fb15k() else {
        return skip("4 (FB15k speedup)", "FB15k");
    };
    let graph = load(&ds);
    // Strictly decreasing wall time up to min(8, cores) plus >= 50%
    // efficiency at the top count; shorter epoch budget keeps the sweep
    // tractable while leaving per-point work dominant.
    let top = physical_threads().min(8);
    let counts: Vec<usize> = [1usize, 2, 4, 8].into_iter().filter(|&p| p <= top).collect();
    let config = fb15k_transe_config().with_epochs(100).with_pin_workers(true);
    let mut times = Vec::new();
    for &p in &counts {
        let (_, report) = train(&graph, &config.clone().with_threads(p)).unwrap();
        println!(
            "ACCEPTANCE 4 (FB15k speedup): p={p} training time {:.1}s",
            report.total_seconds
        );
        times.push(report.total_seconds);
    }
    for w in times.windows(2) {
        assert!(w[1] < w[0], "training time not strictly decreasing: {times:?}");
    }
    let speedup = times[0] / times.last().unwrap();
    let efficiency = speedup / *counts.last().unwrap() as f64;
    println!(
        "ACCEPTANCE 4 (FB15k speedup): speedup at p={} is {:.2}x, efficiency {:.2} (need >= 0.5)",
        counts.last().unwrap(),
        speedup,
        efficiency
    );
    assert!(efficiency >= 0.5);
    println!("ACCEPTANCE 4 (FB15k speedup): PASS");
}

#[test]
fn acceptance_05_wn18_adagrad_epoch_reduction() {
    let Some(ds) = wn18() else {
        return skip("5 (WN18 AdaGrad convergence)", "WN18");
    };
    let graph = load(&ds);
    let (_, sgd_report) = train(&graph, &wn18_transe_config()).unwrap();
    let sgd_final = *sgd_report.loss_curve.last().unwrap();
    // Same dimension and margin as the SGD run so the hinge values are on
    // one scale; only the optimizer and its base rate change.
    let ada_config = wn18_transe_config()
        .with_optimizer(Optimizer::AdaGrad)
        .with_rate(0.3)
        .with_epochs(250);
    let (_, ada_report) = train(&graph, &ada_config).unwrap();
    let reached = ada_report
        .loss_curve
        .iter()
        .position(|&l| l <= sgd_final * 1.1)
        .map(|e| e + 1);
    println!(
        "ACCEPTANCE 5 (AdaGrad convergence): SGD-1000 final loss {sgd_final:.4}; \
         AdaGrad reached 1.1x that after {reached:?} epochs (need <= 250)"
    );
    assert!(reached.is_some(), "AdaGrad did not reach the SGD loss level in 250 epochs");
    println!("ACCEPTANCE 5 (WN18 AdaGrad convergence): PASS");
}

#[test]
fn acceptance_06_corpus_statistics() {
    let mut seen_any = false;
    if let Some(ds) = wn18() {
        seen_any = true;
        let graph = load(&ds);
        let stats = hypergraph_stats(&graph);
        let sigma_ratio = stats.sigma_bar / stats.n as f64;
        let rho_ratio = stats.rho_bar / stats.n as f64;
        println!(
            "ACCEPTANCE 6 (corpus statistics): WN18 sigma_bar/n = {sigma_ratio:.3e} \
             (need within [0.8e-1, 3.4e-1]), rho_bar/n = {rho_ratio:.3e} \
             (need within 4x of 5.6e-4)"
        );
        assert!((0.08..=0.34).contains(&sigma_ratio));
        assert!((5.6e-4 / 4.0..=5.6e-4 * 4.0).contains(&rho_ratio));
    } else {
        skip("6 (corpus statistics, WN18 half)", "WN18");
    }
    if let Some(ds) = fb15k() {
        seen_any = true;
        let graph = load(&ds);
        let stats = hypergraph_stats(&graph);
        let sigma_ratio = stats.sigma_bar / stats.n as f64;
        let rho_ratio = stats.rho_bar / stats.n as f64;
        println!(
            "ACCEPTANCE 6 (corpus statistics): FB15k sigma_bar/n = {sigma_ratio:.3e} \
             (need within [0.45e-2, 1.9e-2]), rho_bar/n = {rho_ratio:.3e} \
             (need within 4x of 2.3e-3)"
        );
        assert!((0.0045..=0.019).contains(&sigma_ratio));
        assert!((2.3e-3 / 4.0..=2.3e-3 * 4.0).contains(&rho_ratio));
    } else {
        skip("6 (corpus statistics, FB15k half)", "FB15k");
    }
    if seen_any {
        println!("ACCEPTANCE 6 (corpus statistics): PASS");
    }
}

// ---------------------------------------------------------------------
// 7-13: always-runnable criteria
// ---------------------------------------------------------------------

#[test]
fn acceptance_07_theorem_vs_simulation() {
    let graph = synth_graph(2_000, 50, 10_000, 77).unwrap();
    let trials = 100_000;
    let mut rng = WorkerRng::new(7, 0);
    for p in [2usize, 4, 8, 16] {
        let analytic = prob_distinct_samples(graph.n_train(), p);
        let sim = simulate_collisions(&graph, p, trials, &mut rng);
        let stderr = sim.stderr_distinct.max(1e-9);
        let sigma_distance = (sim.empirical_distinct - analytic).abs() / stderr;
        println!(
            "ACCEPTANCE 7 (theorem vs simulation): p={p} empirical {:.5} vs analytic {:.5} \
             ({sigma_distance:.2} stderr, need <= 3)",
            sim.empirical_distinct, analytic
        );
        assert!(
            sigma_distance <= 3.0,
            "p={p}: empirical {} vs analytic {analytic} is {sigma_distance:.2} stderr away",
            sim.empirical_distinct
        );
    }
    println!("ACCEPTANCE 7 (theorem vs simulation): PASS");
}

// Reference losses for the finite-difference oracle, written as naive
// loops independent of the library's gradient path. No unit-norm
// assumption anywhere so perturbed points stay valid.

fn ref_diss(diff: &[f64], sim: Similarity) -> f64 {
    diff.iter()
        .map(|d| match sim {
            Similarity::L1 => d.abs(),
            Similarity::L2 => d * d,
        })
        .sum()
}

fn ref_loss_transe(params: &[Vec<f64>], sim: Similarity, margin: f64) -> f64 {
    let (h, r, t, hn, tn) = (&params[0], &params[1], &params[2], &params[3], &params[4]);
    let pos: Vec<f64> = (0..h.len()).map(|k| h[k] + r[k] - t[k]).collect();
    let neg: Vec<f64> = (0..h.len()).map(|k| hn[k] + r[k] - tn[k]).collect();
    (ref_diss(&pos, sim) + margin - ref_diss(&neg, sim)).max(0.0)
}

fn ref_loss_transh(params: &[Vec<f64>], sim: Similarity, margin: f64) -> f64 {
    let (h, r, t, hn, tn, w) = (
        &params[0], &params[1], &params[2], &params[3], &params[4], &params[5],
    );
    let project = |e: &[f64]| -> Vec<f64> {
        let dot: f64 = e.iter().zip(w).map(|(a, b)| a * b).sum();
        e.iter().zip(w).map(|(a, b)| a - dot * b).collect()
    };
    let (hp, tp, hnp, tnp) = (project(h), project(t), project(hn), project(tn));
    let pos: Vec<f64> = (0..h.len()).map(|k| hp[k] + r[k] - tp[k]).collect();
    let neg: Vec<f64> = (0..h.len()).map(|k| hnp[k] + r[k] - tnp[k]).collect();
    (ref_diss(&pos, sim) + margin - ref_diss(&neg, sim)).max(0.0)
}

fn central_differences(params: &[Vec<f64>], loss: impl Fn(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    let step = 1e-6;
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for (vi, v) in params.iter().enumerate() {
        let mut g = vec![0.0; v.len()];
        for k in 0..v.len() {
            work[vi][k] = v[k] + step;
            let up = loss(&work);
            work[vi][k] = v[k] - step;
            let down = loss(&work);
            work[vi][k] = v[k];
            g[k] = (up - down) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

fn assert_grad_close(analytic: f64, fd: f64, what: &str) {
    let scale = analytic.abs().max(fd.abs()).max(1.0);
    assert!(
        (analytic - fd).abs() <= 1e-4 * scale,
        "{what}: analytic {analytic} vs finite difference {fd}"
    );
}

#[test]
fn acceptance_08_gradients_match_finite_differences() {
    let margin = 1.0;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(88);
    let rand_vec =
        |d: usize, r: &mut Xoshiro256PlusPlus| -> Vec<f64> { (0..d).map(|_| r.gen_range(-1.5..1.5)).collect() };

    for d in [5usize, 20] {
        let mut checked = 0;
        while checked < 100 {
            // TransE sample, resampled until comfortably active.
            let params: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(d, &mut rng)).collect();
            if ref_loss_transe(&params, Similarity::L2, margin) < 1e-2 {
                continue;
            }
            let s = SampleVectors {
                head: &params[0],
                relation: &params[1],
                tail: &params[2],
                neg_head: &params[3],
                neg_tail: &params[4],
            };
            let bundle = grad_transe(&s, Similarity::L2, margin, 1.0).unwrap();
            let fd = central_differences(&params, |p| ref_loss_transe(p, Similarity::L2, margin));
            for k in 0..d {
                assert_grad_close(-bundle.d_head[k], fd[0][k], "transe head");
                assert_grad_close(
                    -(bundle.d_relation[k] + bundle.d_neg_relation[k]),
                    fd[1][k],
                    "transe relation",
                );
                assert_grad_close(-bundle.d_tail[k], fd[2][k], "transe tail");
                assert_grad_close(-bundle.d_neg_head[k], fd[3][k], "transe neg head");
                assert_grad_close(-bundle.d_neg_tail[k], fd[4][k], "transe neg tail");
            }
            checked += 1;
        }

        let mut checked = 0;
        while checked < 100 {
            // TransH sample with a unit normal.
            let mut params: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(d, &mut rng)).collect();
            let mut w = rand_vec(d, &mut rng);
            normalize(&mut w).unwrap();
            params.push(w);
            if ref_loss_transh(&params, Similarity::L2, margin) < 1e-2 {
                continue;
            }
            let s = SampleVectors {
                head: &params[0],
                relation: &params[1],
                tail: &params[2],
                neg_head: &params[3],
                neg_tail: &params[4],
            };
            let bundle = grad_transh(&s, &params[5], Similarity::L2, margin, 1.0).unwrap();
            let fd = central_differences(&params, |p| ref_loss_transh(p, Similarity::L2, margin));
            let d_normal = bundle.d_normal.as_ref().unwrap();
            for k in 0..d {
                assert_grad_close(-bundle.d_head[k], fd[0][k], "transh head");
                assert_grad_close(
                    -(bundle.d_relation[k] + bundle.d_neg_relation[k]),
                    fd[1][k],
                    "transh relation",
                );
                assert_grad_close(-bundle.d_tail[k], fd[2][k], "transh tail");
                assert_grad_close(-bundle.d_neg_head[k], fd[3][k], "transh neg head");
                assert_grad_close(-bundle.d_neg_tail[k], fd[4][k], "transh neg tail");
                assert_grad_close(-d_normal[k], fd[5][k], "transh normal");
            }
            checked += 1;
        }
    }
    println!("ACCEPTANCE 8 (gradient correctness): PASS");
}

#[test]
fn acceptance_09_dimension_independence() {
    let d = 12;
    let margin = 4.0;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let mut rand_vec = || -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect() };
    let deltas = |b: &GradientBundle| -> Vec<Vec<f64>> {
        vec![
            b.d_head.clone(),
            b.d_relation.clone(),
            b.d_tail.clone(),
            b.d_neg_head.clone(),
            b.d_neg_tail.clone(),
            b.d_neg_relation.clone(),
        ]
    };
    for sim in [Similarity::L1, Similarity::L2] {
        // Resample until the hinge is comfortably active so the small
        // perturbations below cannot flip it.
        let (base, reference) = loop {
            let candidate: Vec<Vec<f64>> = (0..5).map(|_| rand_vec()).collect();
            let s = SampleVectors {
                head: &candidate[0],
                relation: &candidate[1],
                tail: &candidate[2],
                neg_head: &candidate[3],
                neg_tail: &candidate[4],
            };
            if kge::models::hinge_loss_transe(&s, sim, margin).unwrap() < 0.1 {
                continue;
            }
            let bundle = grad_transe(&s, sim, margin, 0.01).unwrap();
            break (candidate, bundle);
        };
        // Perturb one dimension of one input at a time.
        for input in 0..5 {
            for k in [0usize, 5, d - 1] {
                let mut bumped = base.clone();
                bumped[input][k] += 1e-3;
                let s2 = SampleVectors {
                    head: &bumped[0],
                    relation: &bumped[1],
                    tail: &bumped[2],
                    neg_head: &bumped[3],
                    neg_tail: &bumped[4],
                };
                let got = grad_transe(&s2, sim, margin, 0.01).unwrap();
                for (a, b) in deltas(&reference).iter().zip(deltas(&got).iter()) {
                    for j in 0..d {
                        if j != k {
                            assert_eq!(
                                a[j].to_bits(),
                                b[j].to_bits(),
                                "{sim:?}: perturbing input {input} dim {k} changed dim {j}"
                            );
                        }
                    }
                }
            }
        }
    }
    println!("ACCEPTANCE 9 (dimension independence): PASS");
}

#[test]
fn acceptance_10_ranking_oracle() {
    let graph = split_synth(50, 5, 550, 50, 10);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(10);
    let dim = 8;
    // 20 random stores x 50 triples x both sides = 1000+ prediction cases.
    for _ in 0..20 {
        let config = TrainConfig::default().with_dim(dim).with_seed(rng.next_u64());
        let store = kge::trainer::init_store(&config, &graph);
        for triple in graph.test() {
            for side in [Side::Head, Side::Tail] {
                let got =
                    rank_pair(&store, &graph, triple, side, ModelKind::TransE, Similarity::L1)
                        .unwrap();
                let (raw, filtered) =
                    sort_oracle(&store, &graph, triple, side, Similarity::L1);
                assert_eq!(got.raw_rank, raw, "raw rank mismatch on {triple:?} {side:?}");
                assert_eq!(got.filtered_rank, filtered, "filtered rank mismatch");
                assert!(got.filtered_rank <= got.raw_rank);
                // rank_one agrees with the pair on both modes.
                let one_raw = kge::evaluator::rank_one(
                    &store, &graph, triple, side, RankMode::Raw, ModelKind::TransE, Similarity::L1,
                )
                .unwrap();
                assert_eq!(one_raw, raw);
            }
        }
    }
    println!("ACCEPTANCE 10 (ranking oracle): PASS");
}

/// Independent full-sort rank with the same optimistic tie rule.
fn sort_oracle(
    store: &kge::trainer::EmbeddingStore,
    graph: &KnowledgeGraph,
    triple: &Triple,
    side: Side,
    sim: Similarity,
) -> (usize, usize) {
    let dim = store.dim();
    let mut h = vec![0.0; dim];
    let mut r = vec![0.0; dim];
    let mut t = vec![0.0; dim];
    store.relations().read_row_into(triple.relation, &mut r);
    let score_of = |candidate: usize, h: &mut Vec<f64>, t: &mut Vec<f64>| -> f64 {
        let probe = triple.with_entity(side, candidate);
        store.entities().read_row_into(probe.head, h);
        store.entities().read_row_into(probe.tail, t);
        kge::models::score_transe(h, &r, t, sim).unwrap()
    };
    let correct = triple.entity(side);
    let correct_score = score_of(correct, &mut h, &mut t);
    let known = graph.known_completions(triple, side);
    let mut raw_scores: Vec<f64> = Vec::new();
    let mut filtered_scores: Vec<f64> = Vec::new();
    for e in 0..graph.n_entities() {
        let s = score_of(e, &mut h, &mut t);
        raw_scores.push(s);
        if e == correct || !known.contains(&e) {
            filtered_scores.push(s);
        }
    }
    let rank = |scores: &mut Vec<f64>| -> usize {
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scores.iter().take_while(|&&s| s < correct_score).count() + 1
    };
    (rank(&mut raw_scores), rank(&mut filtered_scores))
}

#[test]
fn acceptance_11_serial_determinism() {
    let graph = split_synth(40, 4, 400, 40, 11);
    let config = TrainConfig::default()
        .with_dim(8)
        .with_margin(0.5)
        .with_rate(0.01)
        .with_epochs(30)
        .with_seed(11);
    let dirs: Vec<tempfile::TempDir> = (0..2)
        .map(|_| {
            let (store, _) = train(&graph, &config).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_embeddings(&store, graph.vocab(), dir.path()).unwrap();
            dir
        })
        .collect();
    for name in ["entities.txt", "relations.txt"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical serial runs");
    }
    println!("ACCEPTANCE 11 (serial determinism): PASS");
}

#[test]
fn acceptance_12_lock_free_progress() {
    let graph = synth_graph(30, 3, 100, 12).unwrap();
    let threads = 4;
    let mut config = TrainConfig::default()
        .with_dim(6)
        .with_epochs(8)
        .with_threads(threads)
        .with_seed(12);
    // Slow the last worker ~1000x relative to a ~1us iteration.
    config.worker_delay = Some(WorkerDelay {
        worker: threads - 1,
        per_iteration: std::time::Duration::from_millis(1),
    });
    let (_, report) = train(&graph, &config).unwrap();
    // Everyone finished their quota despite the straggler.
    let expected = (threads * 2 * graph.n_train()) as u64; // ceil(8/4) = 2 epochs
    assert_eq!(report.iterations_executed, expected);
    let slowed = report.worker_seconds[threads - 1];
    let fastest_rest = report.worker_seconds[..threads - 1]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!(
        "ACCEPTANCE 12 (lock-free progress): slowed worker {slowed:.3}s, \
         fastest other {fastest_rest:.3}s"
    );
    assert!(
        fastest_rest * 5.0 < slowed,
        "non-delayed workers did not finish well ahead: {:?}",
        report.worker_seconds
    );
    println!("ACCEPTANCE 12 (lock-free progress): PASS");
}

fn criterion_13_setup() -> (KnowledgeGraph, TrainConfig) {
    let graph = split_synth(50, 5, 500, 50, 13);
    let config = TrainConfig::default()
        .with_model(ModelKind::TransE)
        .with_sim(Similarity::L1)
        .with_dim(10)
        .with_margin(0.2)
        .with_rate(0.01)
        .with_epochs(200)
        .with_norm_policy(NormPolicy::SampleEntities)
        .with_seed(13);
    (graph, config)
}

#[test]
fn acceptance_13a_synthetic_convergence_loss() {
    let (graph, config) = criterion_13_setup();
    let (_, report) = train(&graph, &config).unwrap();
    let first = report.loss_curve[0];
    let last = *report.loss_curve.last().unwrap();
    println!(
        "ACCEPTANCE 13a (synthetic convergence, loss): epoch-1 loss {first:.4}, \
         final {last:.4}, ratio {:.1}% (need <= 20%)",
        100.0 * last / first
    );
    assert!(last <= 0.2 * first);
    println!("ACCEPTANCE 13a (synthetic convergence, loss): PASS");
}

#[test]
fn acceptance_13b_synthetic_heldout_hits() {
    let (graph, config) = criterion_13_setup();
    let (store, _) = train(&graph, &config).unwrap();
    let metrics = evaluate(&store, &graph, config.model, config.sim).unwrap();
    let baseline = 100.0 * 10.0 / 50.0; // hits@10 with 50 candidate entities
    println!(
        "ACCEPTANCE 13b (synthetic convergence, held-out hits): hits@10(filter) = {:.1}, \
         need >= 3x random baseline {baseline:.0} = 60.0",
        metrics.hits10_filtered
    );
    assert!(
        metrics.hits10_filtered >= 3.0 * baseline,
        "filtered hits@10 {:.1} < 60.0: held-out triples of a uniformly random \
         synthetic graph carry no learnable signal, so ranking them cannot \
         beat the ~20% chance level by 3x (see decisions ledger)",
        metrics.hits10_filtered
    );
    println!("ACCEPTANCE 13b (synthetic convergence, held-out hits): PASS");
}

// ---------------------------------------------------------------------
// Corpus-count checks runnable whenever a dataset file is present
// ---------------------------------------------------------------------

#[test]
fn dataset_line_counts_match_published_tables() {
    let mut any = false;
    if let Some(ds) = wn18() {
        any = true;
        let raws = load_triples(&ds.train, ds.order).unwrap();
        assert_eq!(raws.len(), 141_442);
    }
    if let Some(ds) = fb15k() {
        any = true;
        let raws = load_triples(&ds.train, ds.order).unwrap();
        assert_eq!(raws.len(), 483_142);
    }
    if !any {
        println!("dataset line counts: SKIP (no datasets available)");
    }
}
