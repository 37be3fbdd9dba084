//! Swaps the rate multiplier for each alternative form and compares them on
//! the spiral at one shared setting.

use sage::harness::{train, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    for variant in ModulationVariant::ALL {
        let opt = OptimizerConfig::new(BaseOptimizer::Adam).with_sage(variant, 0.7);
        let label = opt.label();
        let mut cfg = ExperimentConfig::spiral(opt, 2e-3, 2000, 3);
        cfg.eval_every = 2000;
        let outcome = train(&cfg)?;
        match outcome.failure {
            Some(e) => println!("{label:>18}: {e}"),
            None => println!(
                "{label:>18}: val acc {:.3}, mean multiplier {:.3e}",
                outcome.run.summary.final_val_acc,
                outcome.run.metrics.last().unwrap().mod_mean
            ),
        }
    }
    Ok(())
}
