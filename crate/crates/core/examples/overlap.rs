//! Trains the same initialization at several learning rates and measures how
//! much the sets of least-sensitive parameters agree.

use sage::harness::{overlap_sweep, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};

fn main() -> sage::Result<()> {
    let mut base =
        ExperimentConfig::spiral(OptimizerConfig::new(BaseOptimizer::Adam), 1e-3, 1000, 4);
    base.eval_every = 1000;
    base.sweep.bottom_fraction = 0.3;
    let (table, _) = overlap_sweep(&base, &[5e-4, 1e-3, 2e-3, 3e-3, 5e-3])?;
    for r in &table.runs {
        println!(
            "lr {:.0e}  batch seed {:#018x}  val acc {:.3}",
            r.learning_rate, r.batch_seed, r.final_val_acc
        );
    }
    println!(
        "bottom {:.0}% of parameters by sensitivity:",
        100.0 * table.bottom_fraction
    );
    for row in &table.rows {
        println!(
            "  {} runs ({} subsets): mean overlap {:.1}%  range {:.1}%..{:.1}%",
            row.subset_size,
            row.n_subsets,
            100.0 * row.mean_overlap,
            100.0 * row.min_overlap,
            100.0 * row.max_overlap
        );
    }
    Ok(())
}
