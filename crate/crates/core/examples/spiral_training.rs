//! Adam against Adam-SAGE on the three-arm spiral, with learning curves.

use sage::harness::{train, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let steps = 2000;
    let adam = OptimizerConfig::new(BaseOptimizer::Adam);
    let runs = [
        ("adam", adam.clone(), 4e-3),
        (
            "adam-sage",
            adam.with_sage(ModulationVariant::Sage, 0.7),
            2e-3,
        ),
    ];
    for (name, opt, lr) in runs {
        let mut cfg = ExperimentConfig::spiral(opt, lr, steps, 0);
        cfg.eval_every = 250;
        let run = train(&cfg)?.into_result()?;
        println!("{name} (lr {lr})");
        println!("   step  train loss  val loss  val acc  mean multiplier");
        for m in run.metrics.iter().skip(1) {
            println!(
                "  {:5}  {:10.4}  {:8.4}  {:7.3}  {:15.3}",
                m.step, m.train_loss, m.val_loss, m.val_acc, m.mod_mean
            );
        }
        let s = &run.summary;
        println!(
            "  final val acc {:.3}, best {:.3} at step {}\n",
            s.final_val_acc, s.best_val_acc, s.best_val_step
        );
    }
    Ok(())
}
