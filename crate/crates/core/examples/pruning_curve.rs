//! One-shot pruning by full-data sensitivity: trains a baseline and a SAGE
//! model, then removes the least sensitive weights at increasing ratios.

use sage::analysis::sensitivity_stats;
use sage::harness::{pruning_curve_with_snapshot, train, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let ratios = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let adam = OptimizerConfig::new(BaseOptimizer::Adam);
    for (name, opt, lr) in [
        ("adam", adam.clone(), 4e-3),
        (
            "adam-sage",
            adam.with_sage(ModulationVariant::Sage, 0.7),
            2e-3,
        ),
    ] {
        let mut cfg = ExperimentConfig::spiral(opt, lr, 2000, 1);
        cfg.eval_every = 1000;
        cfg.analyses.final_snapshot = true;
        let run = train(&cfg)?.into_result()?;
        let snapshot = run.snapshot.as_ref().expect("requested");
        let stats = sensitivity_stats(&snapshot.values)?;
        println!(
            "{name}: sensitivity mean {:.2e}, variance / mean^2 {:.1}",
            stats.mean, stats.normalized_variance
        );
        let (rows, _) = pruning_curve_with_snapshot(&cfg, &run.params, snapshot, &ratios)?;
        for r in rows {
            println!(
                "  ratio {:.1}  pruned {:5}  val acc {:.3}  change {:+.3}",
                r.ratio, r.pruned, r.val_acc, r.delta
            );
        }
    }
    Ok(())
}
