//! Constant-rate SGD vs AdaGrad: per-element adaptive rates reach the
//! same loss level in far fewer epochs.
//!
//! Run with: `cargo run --release --example adagrad_convergence`

use kge::kgdata::synth_graph;
use kge::trainer::{train, Optimizer, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = synth_graph(100, 8, 1_000, 21)?;
    let base = TrainConfig::default()
        .with_dim(16)
        .with_margin(0.5)
        .with_epochs(120)
        .with_seed(21);

    let (_, sgd) = train(&graph, &base.clone().with_rate(0.01))?;
    let (_, ada) = train(
        &graph,
        &base
            .clone()
            .with_optimizer(Optimizer::AdaGrad)
            .with_rate(0.1),
    )?;

    println!("mean hinge loss per epoch:");
    println!("  epoch      sgd    adagrad");
    for epoch in (0..sgd.loss_curve.len()).step_by(10) {
        println!(
            "  {epoch:>5}   {:>6.4}   {:>6.4}",
            sgd.loss_curve[epoch], ada.loss_curve[epoch]
        );
    }

    let sgd_final = *sgd.loss_curve.last().unwrap();
    let reached = ada
        .loss_curve
        .iter()
        .position(|&l| l <= sgd_final * 1.1)
        .map(|e| e + 1);
    match reached {
        Some(epochs) => println!(
            "\nAdaGrad reached within 10% of SGD's final loss ({sgd_final:.4}) \
             after {epochs} epochs ({}x fewer)",
            sgd.loss_curve.len() / epochs
        ),
        None => println!("\nAdaGrad did not reach SGD's final loss in this budget"),
    }
    Ok(())
}
