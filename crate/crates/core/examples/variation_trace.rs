//! Records the mean local temporal variation of sensitivity at every step
//! and prints it averaged over ten equal windows of training.

use sage::harness::{train, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::schedule::ScheduleSpec;
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let steps = 2000;
    let opt = OptimizerConfig::new(BaseOptimizer::Adam).with_sage(ModulationVariant::Sage, 0.7);
    for schedule in [
        ScheduleSpec::constant(2e-3),
        ScheduleSpec::linear_warmup_decay(2e-3, 0, steps),
    ] {
        let mut cfg = ExperimentConfig::spiral(opt.clone(), 2e-3, steps, 0);
        cfg.schedule = schedule;
        cfg.eval_every = steps;
        cfg.analyses.variation_trace = true;
        let run = train(&cfg)?.into_result()?;
        let trace = run.trace.expect("requested");
        println!("{:?}:", cfg.schedule.kind);
        for (i, w) in trace.chunks(trace.len() / 10).enumerate() {
            let mean = w.iter().map(|p| p.mean).sum::<f64>() / w.len() as f64;
            println!("  window {i}: mean U {mean:.3e}");
        }
    }
    Ok(())
}
