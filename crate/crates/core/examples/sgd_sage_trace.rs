//! Steps SGD-SAGE by hand on a one-parameter quadratic and prints every
//! intermediate quantity, next to the library's own update.

use sage::optim::{make_optimizer, step, BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    // loss(theta) = theta^2 / 8, so g = theta / 4
    let (lr, beta0, eps) = (0.1, 0.7, 1e-8);
    let cfg = OptimizerConfig::new(BaseOptimizer::Sgd).with_sage(ModulationVariant::Sage, beta0);
    let mut state = make_optimizer(&cfg, 1)?;
    let mut theta = [2.0];

    let (mut hand, mut ema) = (2.0f64, 0.0f64);
    println!(" t        I        EMA          U        r        theta (hand / library)");
    for t in 1..=5 {
        let g = hand / 4.0;
        let sens = (hand * g).abs();
        ema = beta0 * ema + (1.0 - beta0) * sens;
        let u = (sens - ema).abs();
        let r = (u + eps) / (ema + eps);
        hand -= lr * r * g;

        let g = [theta[0] / 4.0];
        step(&cfg, &mut state, &mut theta, &g, lr)?;
        println!(
            "{t:2} {sens:9.6} {ema:9.6} {u:10.6} {r:8.5}  {hand:.15} / {:.15}",
            theta[0]
        );
    }
    Ok(())
}
