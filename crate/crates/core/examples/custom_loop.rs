//! Drives the network and optimizer directly, without the harness: a small
//! MLP on Gaussian blobs, with the per-parameter rate multipliers inspected
//! along the way.

use sage::data::{generate, DatasetSpec};
use sage::nn::{evaluate, init_network, loss_and_grad, Activation, LossKind, NetworkSpec};
use sage::optim::{make_optimizer, step, BaseOptimizer, OptimizerConfig};
use sage::schedule::ScheduleSpec;
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let data = generate(&DatasetSpec::blobs(4, 100, 1.2, 3))?;
    let spec = NetworkSpec::new(
        vec![2, 16, 16, 4],
        Activation::Relu,
        LossKind::SoftmaxCrossEntropy,
    )?;
    let mut params = init_network(&spec, 3)?;
    let cfg =
        OptimizerConfig::new(BaseOptimizer::SgdMomentum).with_sage(ModulationVariant::Sage, 0.85);
    let schedule = ScheduleSpec::linear_warmup_decay(0.05, 20, 400);
    let mut state = make_optimizer(&cfg, params.len())?;

    let n = data.train.len();
    for t in 1..=400u64 {
        // fixed cyclic minibatches of 20
        let start = ((t - 1) as usize * 20) % n;
        let idx: Vec<usize> = (start..start + 20).map(|i| i % n).collect();
        let (loss, grad) = loss_and_grad(&spec, &params, &data.train.select(&idx))?;
        step(
            &cfg,
            &mut state,
            params.as_mut_slice(),
            grad.as_slice(),
            schedule.base_lr(t)?,
        )?;
        if t % 100 == 0 {
            let r = &state.last.modulation;
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let max = r.iter().cloned().fold(0.0, f64::max);
            let (_, acc) = evaluate(&spec, &params, &data.validation)?;
            println!(
                "step {t:3}  batch loss {loss:.4}  multiplier mean {mean:.3} max {max:.1}  val acc {:.3}",
                acc.unwrap()
            );
        }
    }
    Ok(())
}
