//! Structured sensitivity: one score per weight or bias block of a trained
//! network, in both aggregation modes.

use sage::analysis::{block_sensitivity, BlockMode, BlockPartition};
use sage::harness::{train, ExperimentConfig};
use sage::nn::loss_and_grad;
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let opt = OptimizerConfig::new(BaseOptimizer::Adam).with_sage(ModulationVariant::Sage, 0.7);
    let mut cfg = ExperimentConfig::spiral(opt, 2e-3, 1000, 2);
    cfg.eval_every = 1000;
    let run = train(&cfg)?.into_result()?;
    let (_, grad) = loss_and_grad(&cfg.network, &run.params, &run.data.train)?;
    let partition = BlockPartition::from_network(&cfg.network);
    let abs_sum = block_sensitivity(
        run.params.as_slice(),
        grad.as_slice(),
        &partition,
        BlockMode::AbsOfSum,
    )?;
    let sum_abs = block_sensitivity(
        run.params.as_slice(),
        grad.as_slice(),
        &partition,
        BlockMode::SumOfAbs,
    )?;
    println!(
        "{:>10} {:>7} {:>12} {:>12}",
        "block", "size", "|sum|", "sum|.|"
    );
    for ((a, s), b) in abs_sum.iter().zip(&sum_abs).zip(partition.blocks()) {
        println!(
            "{:>10} {:>7} {:>12.3e} {:>12.3e}",
            a.name,
            b.range.len(),
            a.score,
            s.score
        );
    }
    Ok(())
}
