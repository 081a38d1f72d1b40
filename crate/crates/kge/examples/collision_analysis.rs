//! How safe is lock-free training for a given corpus? Compute the
//! hypergraph degree statistics, evaluate the analytic collision-freedom
//! bounds for increasing worker counts, and validate them against a
//! Monte-Carlo simulation that draws samples exactly like the trainer.
//!
//! Run with: `cargo run --release --example collision_analysis`

use kge::analysis::{hypergraph_stats, simulate_collisions, CollisionProbabilities};
use kge::kgdata::synth_graph;
use kge::sampling::WorkerRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = synth_graph(2_000, 50, 10_000, 5)?;
    let stats = hypergraph_stats(&graph);
    println!("hypergraph statistics over {} training triples:", stats.n);
    println!("  sigma_hat = {:<6} sigma_bar = {:.2}", stats.sigma_hat, stats.sigma_bar);
    println!("  rho_hat   = {:<6} rho_bar   = {:.2}", stats.rho_hat, stats.rho_bar);
    println!("  sparsity  = {:.4}", stats.sparsity);

    let trials = 50_000;
    let mut rng = WorkerRng::new(42, 0);
    println!("\n{trials} trials per worker count; analytic values are lower bounds");
    println!("  p   P(distinct)        P(no rel coll)     P(no ent coll)");
    for p in [2usize, 4, 8, 16] {
        let analytic = CollisionProbabilities::from_stats(&stats, p);
        let sim = simulate_collisions(&graph, p, trials, &mut rng);
        println!(
            "{:>3}   {:.4} | {:.4}    {:.4} | {:.4}    {:.4} | {:.4}",
            p,
            analytic.p_distinct,
            sim.empirical_distinct,
            analytic.p_no_relation,
            sim.empirical_no_relation,
            analytic.p_no_entity,
            sim.empirical_no_entity,
        );
    }
    println!("      (analytic | empirical)");
    Ok(())
}
