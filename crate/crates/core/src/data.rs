//! Toy datasets (spirals, Gaussian blobs) and CSV ingestion.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::nn::{Batch, Targets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Spiral,
    Blobs,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
        }
    }
}

fn default_n_per_class() -> usize {
    500
}
fn default_n_classes() -> usize {
    3
}
fn default_noise() -> f64 {
    0.03
}
fn default_cycles() -> f64 {
    1.75
}
fn default_label_column() -> String {
    "label".to_string()
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "default_n_per_class")]
    pub n_per_class: usize,
    #[serde(default = "default_n_classes")]
    pub n_classes: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Number of turns each spiral arm makes.
    #[serde(default = "default_cycles")]
    pub cycles: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub split: SplitSpec,
    /// Standardize features with train-split statistics.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

impl DatasetSpec {
    /// 3-class spiral, 500 points per class, noise 0.03, 1.75 turns, 80/20 split.
    pub fn spiral(seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Spiral,
            n_per_class: default_n_per_class(),
            n_classes: default_n_classes(),
            noise_std: default_noise(),
            cycles: default_cycles(),
            seed,
            path: None,
            label_column: default_label_column(),
            split: SplitSpec::default(),
            standardize: true,
        }
    }

    pub fn blobs(n_classes: usize, n_per_class: usize, noise_std: f64, seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Blobs,
            n_per_class,
            n_classes,
            noise_std,
            ..DatasetSpec::spiral(seed)
        }
    }

    pub fn csv(path: impl Into<PathBuf>, label_column: &str, seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Csv,
            path: Some(path.into()),
            label_column: label_column.to_string(),
            ..DatasetSpec::spiral(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(SageError::config(format!(
                "train_fraction must lie in (0, 1), got {f}"
            )));
        }
        match self.kind {
            DatasetKind::Spiral | DatasetKind::Blobs => {
                if self.n_per_class == 0 {
                    return Err(SageError::config("n_per_class must be at least 1"));
                }
                if self.n_classes < 2 {
                    return Err(SageError::config("n_classes must be at least 2"));
                }
                if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
                    return Err(SageError::config("noise_std must be non-negative"));
                }
                if !(self.cycles > 0.0 && self.cycles.is_finite()) {
                    return Err(SageError::config("cycles must be positive"));
                }
            }
            DatasetKind::Csv => {
                if self.path.is_none() {
                    return Err(SageError::config("csv datasets need a path"));
                }
            }
        }
        Ok(())
    }
}

/// Per-feature affine map fitted on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(batch: &Batch) -> Self {
        let d = batch.input_dim();
        let n = batch.len() as f64;
        let mut mean = vec![0.0; d];
        for row in batch.inputs().chunks(d) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in batch.inputs().chunks(d) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, std }
    }

    pub fn apply(&self, batch: &Batch) -> Batch {
        let d = batch.input_dim();
        let mut inputs = batch.inputs().to_vec();
        for row in inputs.chunks_mut(d) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Batch::new(inputs, d, batch.targets().clone()).expect("same shape as a valid batch")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: Batch,
    pub validation: Batch,
    /// Present when features were standardized.
    pub standardization: Option<Standardization>,
    pub n_classes: usize,
}

/// Spiral arm point for class `k` at arm position `u` in (0, 1], before noise.
pub fn spiral_point(u: f64, class: usize, n_classes: usize, cycles: f64) -> [f64; 2] {
    let phi = 2.0 * PI * (cycles * u + class as f64 / n_classes as f64);
    [u * phi.cos(), u * phi.sin()]
}

/// All samples of a synthetic dataset, unsplit and unstandardized, grouped by class.
pub fn generate_raw(spec: &DatasetSpec) -> Result<Batch> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| SageError::config(e.to_string()))?;
    let n = spec.n_per_class * spec.n_classes;
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..spec.n_classes {
        for _ in 0..spec.n_per_class {
            let base = match spec.kind {
                DatasetKind::Spiral => {
                    // gen() is in [0, 1); flip it into (0, 1].
                    let u = 1.0 - rng.gen::<f64>();
                    spiral_point(u, k, spec.n_classes, spec.cycles)
                }
                DatasetKind::Blobs => {
                    let a = 2.0 * PI * k as f64 / spec.n_classes as f64;
                    [2.0 * a.cos(), 2.0 * a.sin()]
                }
                DatasetKind::Csv => unreachable!("csv datasets are loaded, not generated"),
            };
            let (nx, ny) = if spec.noise_std > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            inputs.push(base[0] + nx);
            inputs.push(base[1] + ny);
            labels.push(k);
        }
    }
    Batch::new(inputs, 2, Targets::Classes(labels))
}

/// Builds the train/validation split described by `spec`.
///
/// The split is stratified per class with a seeded shuffle, and features are
/// standardized with statistics of the training split only.
pub fn generate(spec: &DatasetSpec) -> Result<SplitDataset> {
    spec.validate()?;
    let all = match spec.kind {
        DatasetKind::Csv => load_csv(spec.path.as_ref().expect("validated"), &spec.label_column)?,
        _ => generate_raw(spec)?,
    };
    let labels = all.labels().expect("datasets are classification").to_vec();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_5A17_0000_0001);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for k in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        members.shuffle(&mut rng);
        let n_train = (members.len() as f64 * spec.split.train_fraction).round() as usize;
        let n_train = n_train.clamp(usize::from(members.len() > 1), members.len());
        val_idx.extend_from_slice(&members[n_train..]);
        members.truncate(n_train);
        train_idx.extend(members);
    }
    train_idx.shuffle(&mut rng);
    val_idx.shuffle(&mut rng);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(SageError::config(
            "dataset too small to split into train and validation",
        ));
    }
    let train = all.select(&train_idx);
    let validation = all.select(&val_idx);
    if spec.standardize {
        let st = Standardization::fit(&train);
        Ok(SplitDataset {
            train: st.apply(&train),
            validation: st.apply(&validation),
            standardization: Some(st),
            n_classes,
        })
    } else {
        Ok(SplitDataset {
            train,
            validation,
            standardization: None,
            n_classes,
        })
    }
}

fn ingestion(path: &Path, line: Option<usize>, message: impl Into<String>) -> SageError {
    SageError::Ingestion {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a rectangular numeric CSV with a header row.
///
/// Every column except `label_column` becomes a feature. Labels that are all
/// non-negative integers keep their values; otherwise distinct label strings
/// are coded by sorted order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Batch> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingestion(path, None, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| ingestion(path, Some(1), e.to_string()))?
        .clone();
    let label_pos = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            let names: Vec<&str> = headers.iter().collect();
            ingestion(
                path,
                Some(1),
                format!(
                    "label column {label_column:?} not found; available columns: {}",
                    names.join(", ")
                ),
            )
        })?;
    let n_features = headers.len() - 1;
    if n_features == 0 {
        return Err(ingestion(path, Some(1), "no feature columns"));
    }

    let mut inputs = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            ingestion(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        for (c, cell) in record.iter().enumerate() {
            if c == label_pos {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                ingestion(
                    path,
                    line,
                    format!("non-numeric value {cell:?} in column {:?}", &headers[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(ingestion(
                    path,
                    line,
                    format!("non-finite value in column {:?}", &headers[c]),
                ));
            }
            inputs.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(ingestion(path, None, "no data rows"));
    }

    let numeric: Option<Vec<usize>> = raw_labels.iter().map(|s| s.parse::<usize>().ok()).collect();
    let labels = match numeric {
        Some(l) => l,
        None => {
            let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
            let distinct: Vec<&str> = distinct.into_iter().collect();
            raw_labels
                .iter()
                .map(|s| distinct.binary_search(&s.as_str()).expect("present"))
                .collect()
        }
    };
    Batch::new(inputs, n_features, Targets::Classes(labels))
}

/// Writes a classification batch as `x0,x1,...,label` with round-trip float formatting.
pub fn write_csv(batch: &Batch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let labels = batch
        .labels()
        .ok_or_else(|| SageError::config("only classification batches can be written as CSV"))?;
    let mut w = csv::Writer::from_path(path).map_err(|e| ingestion(path, None, e.to_string()))?;
    let d = batch.input_dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    let io = |e: csv::Error| ingestion(path, None, e.to_string());
    w.write_record(&header).map_err(io)?;
    for (i, &y) in labels.iter().enumerate() {
        let mut row: Vec<String> = batch.input_row(i).iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| SageError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_generation_is_deterministic() {
        let spec = DatasetSpec::spiral(11);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = DatasetSpec::spiral(12);
        assert_ne!(
            generate(&spec).unwrap().train,
            generate(&other).unwrap().train
        );
    }

    #[test]
    fn two_arm_spiral_is_point_symmetric() {
        let mut spec = DatasetSpec::spiral(3);
        spec.n_classes = 2;
        spec.noise_std = 0.0;
        spec.n_per_class = 50;
        for u in [0.05, 0.3, 0.77, 1.0] {
            let a = spiral_point(u, 0, 2, spec.cycles);
            let b = spiral_point(u, 1, 2, spec.cycles);
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
        // Every generated class-1 point reflected through the origin lies on the class-0 arm.
        let raw = generate_raw(&spec).unwrap();
        let labels = raw.labels().unwrap();
        for (i, &y) in labels.iter().enumerate() {
            if y != 1 {
                continue;
            }
            let p = raw.input_row(i);
            let u = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let q = spiral_point(u, 0, 2, spec.cycles);
            assert!((q[0] + p[0]).abs() < 1e-9 && (q[1] + p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn split_is_stratified() {
        let spec = DatasetSpec::spiral(5);
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.train.len(), 1200);
        assert_eq!(ds.validation.len(), 300);
        for k in 0..3 {
            let n = ds
                .train
                .labels()
                .unwrap()
                .iter()
                .filter(|&&y| y == k)
                .count();
            assert_eq!(n, 400);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = DatasetSpec::spiral(0);
        s.n_classes = 1;
        assert!(generate(&s).is_err());
        let mut s = DatasetSpec::spiral(0);
        s.split.train_fraction = 1.0;
        assert!(generate(&s).is_err());
        let mut s = DatasetSpec::spiral(0);
        s.kind = DatasetKind::Csv;
        assert!(matches!(generate(&s), Err(SageError::Config(_))));
    }
}
