//! Tunes the base learning rate and beta0 of Adam-SAGE over a small grid.

use sage::harness::{best_cell, grid_search, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let opt = OptimizerConfig::new(BaseOptimizer::Adam).with_sage(ModulationVariant::Sage, 0.7);
    let mut base = ExperimentConfig::spiral(opt, 1e-3, 800, 1000);
    base.eval_every = 800;
    let cells = grid_search(&base, &[1e-3, 2e-3, 4e-3, 8e-3], &[0.6, 0.7, 0.8, 0.9])?;
    println!(
        "{:>8} {:>6} {:>8} {:>9}",
        "lr", "beta0", "val acc", "train acc"
    );
    for c in &cells {
        println!(
            "{:>8.0e} {:>6.1} {:>8.3} {:>9.3}{}",
            c.learning_rate,
            c.beta0,
            c.val_acc,
            c.train_acc,
            if c.diverged { "  diverged" } else { "" }
        );
    }
    if let Some(best) = best_cell(&cells) {
        println!(
            "best: lr {:.0e}, beta0 {:.1} ({:.3})",
            best.learning_rate, best.beta0, best.val_acc
        );
    }
    Ok(())
}
