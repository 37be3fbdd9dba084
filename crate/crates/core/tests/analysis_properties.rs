use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sage::analysis::{
    block_sensitivity, full_data_sensitivity, prune_by_sensitivity, redundancy_overlap, BlockMode,
    BlockPartition, Exclusions, SensitivitySnapshot, SnapshotSource,
};
use sage::harness::overlap_table;
use sage::nn::{init_network, loss_and_grad, Activation, Batch, LossKind, NetworkSpec, Targets};
use sage::sensitivity::sensitivity;

fn snapshot(values: Vec<f64>) -> SensitivitySnapshot {
    SensitivitySnapshot::new(values, SnapshotSource::FullDataset, 0).unwrap()
}

fn small_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    // Few distinct levels so ties are common.
    prop::collection::vec((0u8..6).prop_map(|v| v as f64 * 0.5), len)
}

proptest! {
    #[test]
    fn prune_masks_are_nested(values in small_values(40), a in 0.0f64..0.95, b in 0.0f64..0.95) {
        let params = sage::nn::ParameterVector((0..40).map(|i| i as f64 + 1.0).collect());
        let snap = snapshot(values);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (_, small) = prune_by_sensitivity(&params, &snap, lo, &Exclusions::none()).unwrap();
        let (_, large) = prune_by_sensitivity(&params, &snap, hi, &Exclusions::none()).unwrap();
        for j in 0..40 {
            if !small.keep[j] {
                prop_assert!(!large.keep[j]);
            }
        }
        prop_assert_eq!(small.pruned_count(), (lo * 40.0).floor() as usize);
    }

    #[test]
    fn overlap_ignores_run_order(
        runs in prop::collection::vec(small_values(30), 3..5),
        fraction in 0.1f64..0.9,
    ) {
        let snaps: Vec<SensitivitySnapshot> = runs.into_iter().map(snapshot).collect();
        let forward: Vec<&SensitivitySnapshot> = snaps.iter().collect();
        let mut backward = forward.clone();
        backward.reverse();
        let x = redundancy_overlap(&forward, fraction).unwrap();
        prop_assert_eq!(x, redundancy_overlap(&backward, fraction).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn mean_overlap_never_grows_with_subset_size(
        runs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 25), 2..6),
        fraction in 0.1f64..0.9,
    ) {
        let snaps: Vec<SensitivitySnapshot> = runs.into_iter().map(snapshot).collect();
        let rows = overlap_table(&snaps, fraction).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].mean_overlap <= w[0].mean_overlap + 1e-12);
        }
    }

    #[test]
    fn abs_of_sum_never_exceeds_sum_of_abs(
        theta in prop::collection::vec(-3.0f64..3.0, 17),
        g in prop::collection::vec(-3.0f64..3.0, 17),
    ) {
        let spec = NetworkSpec::new(vec![2, 3, 2], Activation::Relu, LossKind::SoftmaxCrossEntropy).unwrap();
        let partition = BlockPartition::from_network(&spec);
        let a = block_sensitivity(&theta, &g, &partition, BlockMode::AbsOfSum).unwrap();
        let s = block_sensitivity(&theta, &g, &partition, BlockMode::SumOfAbs).unwrap();
        for (x, y) in a.iter().zip(&s) {
            prop_assert_eq!(&x.name, &y.name);
            prop_assert!(x.score <= y.score + 1e-12);
        }
    }
}

#[test]
fn full_data_sensitivity_uses_the_mean_gradient() {
    let spec = NetworkSpec::new(
        vec![2, 6, 3],
        Activation::Tanh,
        LossKind::SoftmaxCrossEntropy,
    )
    .unwrap();
    let params = init_network(&spec, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 9;
    let inputs: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let data = Batch::new(inputs, 2, Targets::Classes(labels)).unwrap();

    let mut mean_grad = vec![0.0; params.len()];
    for i in 0..n {
        let (_, g) = loss_and_grad(&spec, &params, &data.select(&[i])).unwrap();
        for (m, v) in mean_grad.iter_mut().zip(g.as_slice()) {
            *m += v / n as f64;
        }
    }
    let expected = sensitivity(params.as_slice(), &mean_grad).unwrap();
    let snap = full_data_sensitivity(&spec, &params, &data, 0).unwrap();
    for (a, b) in snap.values.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }
}

#[test]
fn biases_are_excluded_from_pruning_by_default() {
    let spec = NetworkSpec::new(
        vec![2, 3, 2],
        Activation::Relu,
        LossKind::SoftmaxCrossEntropy,
    )
    .unwrap();
    let partition = BlockPartition::from_network(&spec);
    let params = sage::nn::ParameterVector(vec![1.0; spec.parameter_count()]);
    let snap = snapshot(vec![0.0; spec.parameter_count()]);
    let (_, mask) =
        prune_by_sensitivity(&params, &snap, 0.5, &Exclusions::biases(&partition)).unwrap();
    for layer in spec.layers() {
        for j in layer.bias_range() {
            assert!(mask.keep[j]);
        }
    }
    // 12 weights, half of them pruned
    assert_eq!(mask.pruned_count(), 6);
}
