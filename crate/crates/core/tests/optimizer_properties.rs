use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sage::optim::{make_optimizer, step, BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn random_grads(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Runs `steps` updates with gradients drawn from `seed`, returning the trajectory.
fn trajectory(
    cfg: &OptimizerConfig,
    theta0: &[f64],
    steps: usize,
    lr: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = make_optimizer(cfg, theta0.len()).unwrap();
    let mut theta = theta0.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let g: Vec<f64> = random_grads(&mut rng, theta.len())
            .iter()
            .zip(&theta)
            .map(|(n, t)| n + 0.1 * t)
            .collect();
        step(cfg, &mut state, &mut theta, &g, lr).unwrap();
        out.push(theta.clone());
    }
    out
}

#[test]
fn identity_variant_reproduces_plain_optimizers() {
    let theta0 = [0.5, -1.2, 0.03, 2.0, -0.7];
    for base in [BaseOptimizer::Sgd, BaseOptimizer::SgdMomentum] {
        let plain = OptimizerConfig::new(base);
        let ident = plain.clone().with_sage(ModulationVariant::Identity, 0.7);
        assert_eq!(
            trajectory(&plain, &theta0, 300, 0.01, 3),
            trajectory(&ident, &theta0, 300, 0.01, 3),
            "{base:?}"
        );
    }
    for base in [BaseOptimizer::Adam, BaseOptimizer::Adamax] {
        let plain = OptimizerConfig::new(base);
        let ident = plain.clone().with_sage(ModulationVariant::Identity, 0.7);
        let a = trajectory(&plain, &theta0, 300, 1e-3, 4);
        let b = trajectory(&ident, &theta0, 300, 1e-3, 4);
        let drift = a
            .last()
            .unwrap()
            .iter()
            .zip(b.last().unwrap())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-12, "{base:?} drift {drift}");
    }
}

#[test]
fn adamax_accumulator_matches_running_maximum() {
    let cfg = OptimizerConfig::new(BaseOptimizer::Adamax);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4;
    let mut state = make_optimizer(&cfg, n).unwrap();
    let mut theta = vec![0.3; n];
    let mut history: Vec<Vec<f64>> = Vec::new();
    for t in 1..=10 {
        let g = random_grads(&mut rng, n);
        history.push(g.clone());
        step(&cfg, &mut state, &mut theta, &g, 1e-3).unwrap();
        for j in 0..n {
            let brute = history
                .iter()
                .enumerate()
                .map(|(k, gk)| cfg.beta2.powi((t - 1 - k) as i32) * gk[j].abs())
                .fold(0.0, f64::max);
            assert!((state.v[j] - brute).abs() <= 1e-15, "t={t} j={j}");
        }
    }
}

#[test]
fn decoupled_decay_contracts_geometrically() {
    for sage in [false, true] {
        let mut cfg = OptimizerConfig::new(BaseOptimizer::Sgd);
        if sage {
            cfg = cfg.with_sage(ModulationVariant::Sage, 0.7);
        }
        cfg.weight_decay = 0.1;
        let mut state = make_optimizer(&cfg, 2).unwrap();
        let mut theta = vec![1.5, -0.25];
        let (lr, steps) = (0.05, 25);
        for _ in 0..steps {
            step(&cfg, &mut state, &mut theta, &[0.0, 0.0], lr).unwrap();
        }
        let factor = (1.0f64 - lr * 0.1).powi(steps);
        assert!((theta[0] - 1.5 * factor).abs() < 1e-14);
        assert!((theta[1] + 0.25 * factor).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn sgd_sage_moves_against_the_gradient(
        theta in prop::collection::vec(-5.0f64..5.0, 1..10),
        seed in any::<u64>(),
        variant in prop::sample::select(ModulationVariant::ALL.to_vec()),
    ) {
        let cfg = OptimizerConfig::new(BaseOptimizer::Sgd).with_sage(variant, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grads(&mut rng, theta.len());
        let mut state = make_optimizer(&cfg, theta.len()).unwrap();
        let mut after = theta.clone();
        step(&cfg, &mut state, &mut after, &g, 0.01).unwrap();
        for j in 0..theta.len() {
            let delta = after[j] - theta[j];
            prop_assert!(delta * g[j] <= 0.0);
            if g[j] != 0.0 && theta[j] != 0.0 {
                prop_assert!(delta != 0.0 || variant != ModulationVariant::Identity);
            }
        }
    }

    #[test]
    fn first_sgd_sage_step_is_linear_in_lr(
        theta in prop::collection::vec(-5.0f64..5.0, 1..10),
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
    ) {
        let cfg = OptimizerConfig::new(BaseOptimizer::Sgd).with_sage(ModulationVariant::Sage, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grads(&mut rng, theta.len());
        let delta = |lr: f64| {
            let mut state = make_optimizer(&cfg, theta.len()).unwrap();
            let mut t = theta.clone();
            step(&cfg, &mut state, &mut t, &g, lr).unwrap();
            t.iter().zip(&theta).map(|(a, b)| a - b).collect::<Vec<_>>()
        };
        let small = delta(1e-3);
        let big = delta(1e-3 * scale);
        for (s, b) in small.iter().zip(&big) {
            prop_assert!((b - scale * s).abs() <= 1e-9 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn disabled_modulation_is_exactly_one(seed in any::<u64>()) {
        let cfg = OptimizerConfig::new(BaseOptimizer::Adam);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = make_optimizer(&cfg, 5).unwrap();
        let mut theta = random_grads(&mut rng, 5);
        for _ in 0..5 {
            let g = random_grads(&mut rng, 5);
            step(&cfg, &mut state, &mut theta, &g, 1e-2).unwrap();
            prop_assert!(state.last.modulation.iter().all(|r| *r == 1.0));
        }
    }
}
