use std::fs;

use sage::analysis::{prune_by_sensitivity, Exclusions, SensitivitySnapshot, SnapshotSource};
use sage::data::DatasetSpec;
use sage::harness::output::metrics_csv;
use sage::harness::{
    decision_boundary_grid, grid_search, overlap_sweep, pruning_curve, pruning_curve_with_snapshot,
    run_training, train, Analyses, BoundarySpec, ExperimentConfig, PruningCurveSpec,
};
use sage::nn::{predict_labels, Activation, LossKind, NetworkSpec, ParameterVector};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;
use sage::SageError;

/// A small, fast spiral setup.
fn small(opt: OptimizerConfig, lr: f64, steps: u64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::spiral(opt, lr, steps, seed);
    cfg.dataset = DatasetSpec::spiral(seed);
    cfg.dataset.n_per_class = 60;
    cfg.network = NetworkSpec::new(
        vec![2, 24, 24, 3],
        Activation::Relu,
        LossKind::SoftmaxCrossEntropy,
    )
    .unwrap();
    cfg.batch_size = 16;
    cfg.eval_every = 50;
    cfg
}

fn adam_sage() -> OptimizerConfig {
    OptimizerConfig::new(BaseOptimizer::Adam).with_sage(ModulationVariant::Sage, 0.7)
}

#[test]
fn zero_steps_reports_the_initial_model() {
    let run = train(&small(adam_sage(), 1e-2, 0, 1))
        .unwrap()
        .into_result()
        .unwrap();
    assert_eq!(run.params, run.initial_params);
    assert_eq!(run.metrics.len(), 1);
    assert_eq!(run.metrics[0].step, 0);
    assert_eq!(run.summary.steps_completed, 0);
}

#[test]
fn identity_variant_logs_match_plain_sgd() {
    let plain = small(OptimizerConfig::new(BaseOptimizer::Sgd), 0.05, 200, 3);
    let ident = small(
        OptimizerConfig::new(BaseOptimizer::Sgd).with_sage(ModulationVariant::Identity, 0.7),
        0.05,
        200,
        3,
    );
    let a = train(&plain).unwrap().into_result().unwrap();
    let b = train(&ident).unwrap().into_result().unwrap();
    assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
    assert_eq!(a.params, b.params);
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(adam_sage(), 5e-3, 150, 4);
    cfg.output_dir = Some(dir.path().join("a"));
    run_training(&cfg).unwrap();
    cfg.output_dir = Some(dir.path().join("b"));
    run_training(&cfg).unwrap();
    let a = fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_directory_has_config_metrics_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(adam_sage(), 5e-3, 100, 5);
    cfg.output_dir = Some(dir.path().to_path_buf());
    cfg.analyses = Analyses {
        variation_trace: true,
        trace_sample: Some(50),
        final_snapshot: true,
        boundary_grid: Some(BoundarySpec {
            bounds: [-2.0, 2.0, -2.0, 2.0],
            resolution: 20,
        }),
        pruning_curve: Some(PruningCurveSpec::default()),
    };
    let report = run_training(&cfg).unwrap();
    for name in [
        "config.json",
        "metrics.csv",
        "summary.json",
        "checkpoint.bin",
        "variation_trace.csv",
        "sensitivity.csv",
        "sensitivity_stats.json",
        "block_sensitivity.csv",
        "boundary.csv",
        "boundary.svg",
        "prune_curve.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let echoed = ExperimentConfig::load(dir.path().join("config.json")).unwrap();
    assert_eq!(echoed, cfg);
    let (_, params) = sage::checkpoint::load(dir.path().join("checkpoint.bin")).unwrap();
    assert_eq!(params, report.run.params);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,train_loss,val_loss,val_acc,base_lr"));
    assert_eq!(metrics.lines().count(), 1 + 3); // steps 0, 50, 100
}

#[test]
fn one_cell_grid_equals_a_single_run() {
    let cfg = small(adam_sage(), 8e-3, 120, 6);
    let cells = grid_search(&cfg, &[8e-3], &[0.7]).unwrap();
    let run = run_training(&cfg).unwrap().run;
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].val_acc, run.summary.final_val_acc);
    assert_eq!(cells[0].train_acc, run.summary.final_train_acc);
    assert!(!cells[0].diverged);
}

#[test]
fn grid_covers_every_pair_and_survives_divergence() {
    // The full-width relu network blows up within a few steps at lr 1e3.
    let mut cfg = ExperimentConfig::spiral(
        OptimizerConfig::new(BaseOptimizer::Sgd).with_sage(ModulationVariant::Sage, 0.7),
        0.1,
        30,
        7,
    );
    cfg.dataset.n_per_class = 60;
    let cells = grid_search(&cfg, &[1e-2, 1e-1, 1e3], &[0.5, 0.7, 0.9]).unwrap();
    assert_eq!(cells.len(), 9);
    assert_eq!(cells[0].learning_rate, 1e-2);
    assert_eq!(cells[1].beta0, 0.7);
    for c in &cells[6..] {
        assert!(c.diverged, "lr 1e3 should diverge: {c:?}");
        assert!(c.val_acc.is_nan());
    }
    assert!(cells[..6].iter().all(|c| !c.diverged));
}

#[test]
fn diverging_run_writes_partial_output_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::spiral(OptimizerConfig::new(BaseOptimizer::Sgd), 1e3, 50, 8);
    cfg.dataset.n_per_class = 60;
    cfg.output_dir = Some(dir.path().to_path_buf());
    let err = run_training(&cfg).unwrap_err();
    assert!(err.is_divergence(), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(dir.path().join("metrics.csv").is_file());
    assert!(!dir.path().join("checkpoint.bin").exists());
}

#[test]
fn pruning_curve_starts_at_zero_and_is_sorted() {
    let cfg = small(adam_sage(), 5e-3, 150, 9);
    let run = train(&cfg).unwrap().into_result().unwrap();
    let rows = pruning_curve(&cfg, &run.params, &[0.4, 0.0, 0.2]).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    assert_eq!(ratios, vec![0.0, 0.2, 0.4]);
    assert_eq!(rows[0].delta, 0.0);
    assert_eq!(rows[0].pruned, 0);
    assert!(rows[1].pruned < rows[2].pruned);
}

#[test]
fn equal_sensitivity_prunes_lowest_indices() {
    let n = 10;
    let params = ParameterVector(vec![1.0; n]);
    let snap = SensitivitySnapshot::new(vec![0.5; n], SnapshotSource::FullDataset, 0).unwrap();
    let (pruned, mask) = prune_by_sensitivity(&params, &snap, 0.4, &Exclusions::none()).unwrap();
    assert_eq!(&pruned.0[..4], &[0.0; 4]);
    assert_eq!(&pruned.0[4..], &[1.0; 6]);
    assert_eq!(mask.pruned_count(), 4);
}

#[test]
fn masks_from_one_snapshot_nest() {
    let mut cfg = small(adam_sage(), 5e-3, 100, 10);
    cfg.analyses.final_snapshot = true;
    let run = train(&cfg).unwrap().into_result().unwrap();
    let ratios = [0.0, 0.1, 0.2, 0.3, 0.4];
    let (_, masks) =
        pruning_curve_with_snapshot(&cfg, &run.params, run.snapshot.as_ref().unwrap(), &ratios)
            .unwrap();
    for w in masks.windows(2) {
        assert!(w[0]
            .keep
            .iter()
            .zip(&w[1].keep)
            .all(|(small, large)| *small || !*large));
    }
}

#[test]
fn duplicated_learning_rates_overlap_completely() {
    let cfg = small(adam_sage(), 5e-3, 80, 11);
    let (table, runs) = overlap_sweep(&cfg, &[5e-3, 5e-3]).unwrap();
    assert_eq!(runs[0].params, runs[1].params);
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].mean_overlap, 1.0);

    let (table, _) = overlap_sweep(&cfg, &[2e-3, 5e-3, 1e-2]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].n_subsets, 3);
    for row in &table.rows {
        assert!((0.0..=1.0).contains(&row.mean_overlap));
    }
    assert!(table.rows[1].mean_overlap <= table.rows[0].mean_overlap);
}

#[test]
fn boundary_agrees_with_predict_on_training_points() {
    let cfg = small(adam_sage(), 1e-2, 300, 12);
    let run = train(&cfg).unwrap().into_result().unwrap();
    let grid =
        decision_boundary_grid(&cfg.network, &run.params, [-2.5, 2.5, -2.5, 2.5], 200).unwrap();
    let train = &run.data.train;
    let predicted = predict_labels(&cfg.network, &run.params, train.inputs()).unwrap();
    let agree = (0..train.len())
        .filter(|&i| {
            let p = train.input_row(i);
            grid.label_near(p[0], p[1]) == predicted[i]
        })
        .count() as f64
        / train.len() as f64;
    assert!(
        agree >= run.summary.final_train_acc,
        "agreement {agree} below train accuracy {}",
        run.summary.final_train_acc
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small(adam_sage(), 1e-2, 10, 0);
    cfg.batch_size = 0;
    assert!(matches!(train(&cfg), Err(SageError::Config(_))));

    let mut cfg = small(adam_sage(), 1e-2, 10, 0);
    cfg.network.layer_dims = vec![3, 8, 3];
    assert!(matches!(train(&cfg), Err(SageError::Config(_))));

    let text = small(adam_sage(), 1e-2, 10, 0)
        .to_json()
        .replace("\"batch_size\"", "\"batch_sz\"");
    assert!(matches!(
        ExperimentConfig::from_json(&text),
        Err(SageError::Config(_))
    ));
}
