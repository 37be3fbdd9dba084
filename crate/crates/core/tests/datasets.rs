use std::fs;

use sage::data::{generate, generate_raw, load_csv, write_csv, DatasetSpec};
use sage::nn::{evaluate, init_network, loss_and_grad, Activation, LossKind, NetworkSpec, Targets};
use sage::optim::{make_optimizer, step, BaseOptimizer, OptimizerConfig};
use sage::SageError;

fn column_moments(values: &[f64], d: usize, col: usize) -> (f64, f64) {
    let xs: Vec<f64> = values.chunks(d).map(|r| r[col]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

#[test]
fn training_features_are_standardized() {
    for spec in [DatasetSpec::spiral(4), DatasetSpec::blobs(4, 50, 0.3, 9)] {
        let data = generate(&spec).unwrap();
        for col in 0..2 {
            let (mean, var) = column_moments(data.train.inputs(), 2, col);
            assert!(mean.abs() < 1e-10, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-10, "var {var}");
        }
    }
}

#[test]
fn classes_stay_balanced_across_the_split() {
    let mut spec = DatasetSpec::spiral(12);
    spec.n_per_class = 37;
    spec.n_classes = 4;
    let data = generate(&spec).unwrap();
    let train = data.train.labels().unwrap();
    let val = data.validation.labels().unwrap();
    for k in 0..4 {
        let nt = train.iter().filter(|&&y| y == k).count();
        let nv = val.iter().filter(|&&y| y == k).count();
        assert_eq!(nt + nv, 37);
        assert_eq!(nt, 30); // round(0.8 * 37)
    }
    assert_eq!(data.n_classes, 4);
}

#[test]
fn different_seeds_give_different_data() {
    let a = generate_raw(&DatasetSpec::spiral(1)).unwrap();
    let b = generate_raw(&DatasetSpec::spiral(2)).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, generate_raw(&DatasetSpec::spiral(1)).unwrap());
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spiral.csv");
    let raw = generate_raw(&DatasetSpec::spiral(3)).unwrap();
    write_csv(&raw, &path).unwrap();
    assert_eq!(load_csv(&path, "label").unwrap(), raw);
}

#[test]
fn small_csv_loads_with_string_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    fs::write(&path, "a,b,kind\n1.0,2.0,cat\n3.5,-1,dog\n0,0.25,cat\n").unwrap();
    let batch = load_csv(&path, "kind").unwrap();
    assert_eq!(batch.len(), 3);
    assert_eq!(batch.input_dim(), 2);
    assert_eq!(batch.inputs(), &[1.0, 2.0, 3.5, -1.0, 0.0, 0.25]);
    assert_eq!(batch.targets(), &Targets::Classes(vec![0, 1, 0]));
}

#[test]
fn csv_problems_are_ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");

    fs::write(&path, "x,y\n1,2\n").unwrap();
    match load_csv(&path, "label") {
        Err(SageError::Ingestion { message, .. }) => {
            assert!(message.contains("x, y"), "{message}");
        }
        other => panic!("expected ingestion error, got {other:?}"),
    }

    fs::write(&path, "x,label\n1,0\nabc,1\n").unwrap();
    match load_csv(&path, "label") {
        Err(e @ SageError::Ingestion { line: Some(3), .. }) => assert_eq!(e.exit_code(), 4),
        other => panic!("expected error on line 3, got {other:?}"),
    }

    fs::write(&path, "x,label\n1,0\n2\n").unwrap();
    assert!(matches!(
        load_csv(&path, "label"),
        Err(SageError::Ingestion { .. })
    ));

    assert!(matches!(
        load_csv(dir.path().join("missing.csv"), "label"),
        Err(SageError::Ingestion { .. })
    ));
}

#[test]
fn separated_blobs_are_linearly_separable() {
    let data = generate(&DatasetSpec::blobs(3, 60, 0.05, 21)).unwrap();
    let spec =
        NetworkSpec::new(vec![2, 3], Activation::Relu, LossKind::SoftmaxCrossEntropy).unwrap();
    let mut params = init_network(&spec, 0).unwrap();
    let cfg = OptimizerConfig::new(BaseOptimizer::Adam);
    let mut state = make_optimizer(&cfg, params.len()).unwrap();
    for _ in 0..300 {
        let (_, g) = loss_and_grad(&spec, &params, &data.train).unwrap();
        step(&cfg, &mut state, params.as_mut_slice(), g.as_slice(), 0.05).unwrap();
    }
    let (_, acc) = evaluate(&spec, &params, &data.train).unwrap();
    assert_eq!(acc, Some(1.0));
}
