//! Redundancy analyses built on parameter sensitivity: full-dataset
//! snapshots, one-shot pruning, overlap of low-sensitivity sets across runs,
//! variation traces, and block-level (structured) scores.
//!
//! All variances are population variances.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::nn::{loss_and_grad, Batch, NetworkSpec, ParameterVector};
use crate::sensitivity::sensitivity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSource {
    FullDataset,
    Minibatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySnapshot {
    pub values: Vec<f64>,
    pub source: SnapshotSource,
    pub step: u64,
}

impl SensitivitySnapshot {
    pub fn new(values: Vec<f64>, source: SnapshotSource, step: u64) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(SageError::config(format!(
                "snapshot entry {j} is {}, sensitivities are non-negative",
                values[j]
            )));
        }
        Ok(SensitivitySnapshot {
            values,
            source,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sensitivity from a single gradient of the mean loss over all of `dataset`.
pub fn full_data_sensitivity(
    spec: &NetworkSpec,
    params: &ParameterVector,
    dataset: &Batch,
    step: u64,
) -> Result<SensitivitySnapshot> {
    let (_, grad) = loss_and_grad(spec, params, dataset)?;
    let values = sensitivity(params.as_slice(), grad.as_slice())?;
    SensitivitySnapshot::new(values, SnapshotSource::FullDataset, step)
}

/// A named contiguous slice of the flat parameter layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub range: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Block>,
    len: usize,
}

impl BlockPartition {
    /// Blocks must be disjoint and together cover `0..len`.
    pub fn new(mut blocks: Vec<Block>, len: usize) -> Result<Self> {
        blocks.sort_by_key(|b| b.range.start);
        let mut cursor = 0;
        for b in &blocks {
            if b.range.start != cursor || b.range.end < b.range.start {
                return Err(SageError::config(format!(
                    "block {:?} at {:?} leaves a gap or overlaps (expected start {cursor})",
                    b.name, b.range
                )));
            }
            cursor = b.range.end;
        }
        if cursor != len {
            return Err(SageError::config(format!(
                "blocks cover 0..{cursor}, layout has {len} parameters"
            )));
        }
        let names: BTreeSet<&str> = blocks.iter().map(|b| b.name.as_str()).collect();
        if names.len() != blocks.len() {
            return Err(SageError::config("block names must be unique"));
        }
        Ok(BlockPartition { blocks, len })
    }

    /// `layer{l}.weight` and `layer{l}.bias` for every dense layer.
    pub fn from_network(spec: &NetworkSpec) -> Self {
        let blocks = spec
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(l, shape)| {
                [
                    Block {
                        name: format!("layer{l}.weight"),
                        range: shape.weight_range(),
                    },
                    Block {
                        name: format!("layer{l}.bias"),
                        range: shape.bias_range(),
                    },
                ]
            })
            .collect();
        BlockPartition {
            blocks,
            len: spec.parameter_count(),
        }
    }

    /// One block per parameter, named by index.
    pub fn singletons(len: usize) -> Self {
        let blocks = (0..len)
            .map(|j| Block {
                name: format!("p{j}"),
                range: j..j + 1,
            })
            .collect();
        BlockPartition { blocks, len }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block_of(&self, index: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.range.contains(&index))
    }

    /// Names of every block whose name ends in `.bias`.
    pub fn bias_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .filter(|b| b.name.ends_with(".bias"))
            .map(|b| b.name.clone())
            .collect()
    }

    pub fn exclusions(&self, names: &[String]) -> Result<Exclusions> {
        let mut ranges = Vec::with_capacity(names.len());
        for name in names {
            let block = self
                .blocks
                .iter()
                .find(|b| &b.name == name)
                .ok_or_else(|| SageError::config(format!("no parameter block named {name:?}")))?;
            ranges.push(block.range.clone());
        }
        Ok(Exclusions {
            names: names.to_vec(),
            ranges,
        })
    }
}

/// Parameter blocks left out of pruning and left untouched by it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exclusions {
    names: Vec<String>,
    ranges: Vec<Range<usize>>,
}

impl Exclusions {
    pub fn none() -> Self {
        Exclusions::default()
    }

    /// All bias blocks of `partition`.
    pub fn biases(partition: &BlockPartition) -> Self {
        partition
            .exclusions(&partition.bias_names())
            .expect("bias names come from the partition")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, index: usize) -> bool {
        self.ranges.iter().any(|r| r.contains(&index))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    pub keep: Vec<bool>,
    pub ratio: f64,
    pub exclusions: Vec<String>,
}

impl PruneMask {
    pub fn pruned_count(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }
}

/// Indices ordered from least to most sensitive, ties broken by lower index.
fn ascending_order(values: &[f64], candidates: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    idx.sort_by(|&a, &b| match values[a].total_cmp(&values[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

fn validate_ratio(ratio: f64) -> Result<()> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(SageError::config(format!(
            "pruning ratio must lie in [0, 1), got {ratio}"
        )));
    }
    Ok(())
}

/// Zeroes the `floor(ratio * n)` least-sensitive non-excluded parameters.
pub fn prune_by_sensitivity(
    params: &ParameterVector,
    snapshot: &SensitivitySnapshot,
    ratio: f64,
    exclusions: &Exclusions,
) -> Result<(ParameterVector, PruneMask)> {
    validate_ratio(ratio)?;
    if snapshot.len() != params.len() {
        return Err(SageError::config(format!(
            "snapshot has {} entries, parameters have {}",
            snapshot.len(),
            params.len()
        )));
    }
    let order = ascending_order(
        &snapshot.values,
        (0..params.len()).filter(|&j| !exclusions.contains(j)),
    );
    let k = (ratio * order.len() as f64).floor() as usize;
    let mut keep = vec![true; params.len()];
    let mut pruned = params.clone();
    for &j in &order[..k] {
        keep[j] = false;
        pruned.0[j] = 0.0;
    }
    Ok((
        pruned,
        PruneMask {
            keep,
            ratio,
            exclusions: exclusions.names().to_vec(),
        },
    ))
}

/// The `floor(fraction * n)` least-sensitive indices, in ascending-sensitivity order.
pub fn bottom_set(values: &[f64], fraction: f64) -> Vec<usize> {
    let order = ascending_order(values, 0..values.len());
    let k = (fraction * values.len() as f64).floor() as usize;
    order[..k].to_vec()
}

/// Size of the intersection of every snapshot's bottom set, divided by the bottom-set size.
pub fn redundancy_overlap(snapshots: &[&SensitivitySnapshot], bottom_fraction: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(SageError::config("overlap needs at least two snapshots"));
    }
    if !(bottom_fraction > 0.0 && bottom_fraction < 1.0) {
        return Err(SageError::config(format!(
            "bottom_fraction must lie in (0, 1), got {bottom_fraction}"
        )));
    }
    let n = snapshots[0].len();
    if snapshots.iter().any(|s| s.len() != n) {
        return Err(SageError::config("snapshots have different lengths"));
    }
    let k = (bottom_fraction * n as f64).floor() as usize;
    if k == 0 {
        return Err(SageError::config("bottom set is empty at this fraction"));
    }
    let mut common: BTreeSet<usize> = bottom_set(&snapshots[0].values, bottom_fraction)
        .into_iter()
        .collect();
    for s in &snapshots[1..] {
        let next: BTreeSet<usize> = bottom_set(&s.values, bottom_fraction).into_iter().collect();
        common = common.intersection(&next).copied().collect();
    }
    Ok(common.len() as f64 / k as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// `|sum_j theta_j g_j|`
    #[default]
    AbsOfSum,
    /// `sum_j |theta_j g_j|`
    SumOfAbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub name: String,
    pub score: f64,
}

/// One structured sensitivity score per block, in partition order.
pub fn block_sensitivity(
    params: &[f64],
    grads: &[f64],
    partition: &BlockPartition,
    mode: BlockMode,
) -> Result<Vec<BlockScore>> {
    if params.len() != grads.len() || params.len() != partition.len() {
        return Err(SageError::config(format!(
            "block sensitivity shape mismatch: {} params, {} grads, partition over {}",
            params.len(),
            grads.len(),
            partition.len()
        )));
    }
    Ok(partition
        .blocks()
        .iter()
        .map(|b| {
            let products = params[b.range.clone()]
                .iter()
                .zip(&grads[b.range.clone()])
                .map(|(t, g)| t * g);
            let score = match mode {
                BlockMode::AbsOfSum => products.sum::<f64>().abs(),
                BlockMode::SumOfAbs => products.map(f64::abs).sum(),
            };
            BlockScore {
                name: b.name.clone(),
                score,
            }
        })
        .collect())
}

pub(crate) fn mean_and_variance(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    // One refinement pass removes the rounding left by the naive sum.
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub mean: f64,
    pub variance: f64,
}

/// Per-step mean and variance of the local temporal variation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VariationRecorder {
    subset: Option<Vec<usize>>,
    points: Vec<TracePoint>,
}

impl VariationRecorder {
    /// Tracks every parameter.
    pub fn new() -> Self {
        VariationRecorder::default()
    }

    /// Tracks a seeded random subset of `count` out of `len` parameters.
    pub fn sampled(len: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut subset = sample(&mut rng, len, count.min(len)).into_vec();
        subset.sort_unstable();
        VariationRecorder {
            subset: Some(subset),
            points: Vec::new(),
        }
    }

    pub fn record(&mut self, step: u64, variation: &[f64]) {
        let (mean, variance) = match &self.subset {
            Some(idx) => mean_and_variance(idx.iter().map(|&j| variation[j])),
            None => mean_and_variance(variation.iter().copied()),
        };
        self.points.push(TracePoint {
            step,
            mean,
            variance,
        });
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }
}

/// Levels reported by [`sensitivity_stats`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityStats {
    pub count: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// `variance / mean^2`; scale-free spread of the distribution.
    pub normalized_variance: f64,
    /// `(level, value)` pairs for [`QUANTILE_LEVELS`], linearly interpolated.
    pub quantiles: Vec<(f64, f64)>,
    /// 50 equal bins over `[q01, q99]`; entries outside that range are dropped.
    pub histogram: Histogram,
}

fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sensitivity_stats(values: &[f64]) -> Result<SensitivityStats> {
    if values.is_empty() {
        return Err(SageError::config("statistics of an empty snapshot"));
    }
    let (mean, variance) = mean_and_variance(values.iter().copied());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles: Vec<(f64, f64)> = QUANTILE_LEVELS
        .iter()
        .map(|&q| (q, quantile_sorted(&sorted, q)))
        .collect();
    let lo = quantiles[0].1;
    let hi = quantiles[QUANTILE_LEVELS.len() - 1].1;
    let mut counts = vec![0; HISTOGRAM_BINS];
    let width = hi - lo;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let bin = if width > 0.0 {
            (((v - lo) / width) * HISTOGRAM_BINS as f64).floor() as usize
        } else {
            0
        };
        counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
    }
    Ok(SensitivityStats {
        count: values.len(),
        mean,
        variance,
        normalized_variance: variance / (mean * mean),
        quantiles,
        histogram: Histogram { lo, hi, counts },
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> SageError + '_ {
    move |e| SageError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// One row per parameter: `index,block,sensitivity`.
pub fn write_snapshot_csv(
    snapshot: &SensitivitySnapshot,
    partition: &BlockPartition,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["index", "block", "sensitivity"])
        .map_err(&err)?;
    for block in partition.blocks() {
        for j in block.range.clone() {
            w.write_record([
                j.to_string(),
                block.name.clone(),
                snapshot.values[j].to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| SageError::io(path, e))
}

/// One row per block: `block,score`.
pub fn write_block_csv(scores: &[BlockScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["block", "score"]).map_err(&err)?;
    for s in scores {
        w.write_record([s.name.clone(), s.score.to_string()])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| SageError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(values: Vec<f64>) -> SensitivitySnapshot {
        SensitivitySnapshot::new(values, SnapshotSource::FullDataset, 0).unwrap()
    }

    #[test]
    fn prune_lowest_two() {
        let params = ParameterVector(vec![1.0, 2.0, 3.0, 4.0]);
        let (p, mask) = prune_by_sensitivity(
            &params,
            &snap(vec![1.0, 3.0, 0.0, 5.0]),
            0.5,
            &Exclusions::none(),
        )
        .unwrap();
        assert_eq!(mask.keep, vec![false, true, false, true]);
        assert_eq!(p.0, vec![0.0, 2.0, 0.0, 4.0]);
    }

    #[test]
    fn prune_zero_ratio_is_identity() {
        let params = ParameterVector(vec![1.0, -2.0]);
        let (p, mask) =
            prune_by_sensitivity(&params, &snap(vec![0.5, 0.1]), 0.0, &Exclusions::none()).unwrap();
        assert_eq!(p, params);
        assert!(mask.keep.iter().all(|k| *k));
    }

    #[test]
    fn prune_ties_go_to_lower_index() {
        let params = ParameterVector(vec![1.0; 4]);
        let (_, mask) =
            prune_by_sensitivity(&params, &snap(vec![2.0; 4]), 0.5, &Exclusions::none()).unwrap();
        assert_eq!(mask.keep, vec![false, false, true, true]);
    }

    #[test]
    fn prune_rejects_full_ratio() {
        let params = ParameterVector(vec![1.0; 4]);
        assert!(matches!(
            prune_by_sensitivity(&params, &snap(vec![2.0; 4]), 1.0, &Exclusions::none()),
            Err(SageError::Config(_))
        ));
    }

    #[test]
    fn prune_skips_excluded_blocks() {
        let partition = BlockPartition::new(
            vec![
                Block {
                    name: "w".into(),
                    range: 0..3,
                },
                Block {
                    name: "b".into(),
                    range: 3..5,
                },
            ],
            5,
        )
        .unwrap();
        let ex = partition.exclusions(&["b".to_string()]).unwrap();
        let params = ParameterVector(vec![1.0; 5]);
        let (_, mask) =
            prune_by_sensitivity(&params, &snap(vec![5.0, 4.0, 3.0, 0.0, 0.0]), 0.4, &ex).unwrap();
        // floor(0.4 * 3) = 1 prunable weight removed.
        assert_eq!(mask.keep, vec![true, true, false, true, true]);
        assert_eq!(mask.exclusions, vec!["b".to_string()]);
    }

    #[test]
    fn partition_validation() {
        assert!(BlockPartition::new(
            vec![Block {
                name: "a".into(),
                range: 0..2
            }],
            3
        )
        .is_err());
        assert!(BlockPartition::new(
            vec![
                Block {
                    name: "a".into(),
                    range: 0..2
                },
                Block {
                    name: "b".into(),
                    range: 1..3
                },
            ],
            3
        )
        .is_err());
        assert!(BlockPartition::new(
            vec![
                Block {
                    name: "a".into(),
                    range: 0..2
                },
                Block {
                    name: "a".into(),
                    range: 2..3
                },
            ],
            3
        )
        .is_err());
    }

    #[test]
    fn overlap_by_hand() {
        // Bottom half of 6 entries: {1,2,3} and {2,3,4}.
        let a = snap(vec![9.0, 0.1, 0.2, 0.3, 8.0, 7.0]);
        let b = snap(vec![9.0, 8.0, 0.1, 0.2, 0.3, 7.0]);
        assert!((redundancy_overlap(&[&a, &b], 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(redundancy_overlap(&[&a, &a], 0.5).unwrap(), 1.0);
        assert!(redundancy_overlap(&[&a], 0.5).is_err());
        let short = snap(vec![1.0]);
        assert!(matches!(
            redundancy_overlap(&[&a, &short], 0.5),
            Err(SageError::Config(_))
        ));
    }

    #[test]
    fn block_modes_diverge() {
        let part = BlockPartition::new(
            vec![Block {
                name: "blk".into(),
                range: 0..2,
            }],
            2,
        )
        .unwrap();
        let abs_sum =
            block_sensitivity(&[1.0, -1.0], &[1.0, 1.0], &part, BlockMode::AbsOfSum).unwrap();
        let sum_abs =
            block_sensitivity(&[1.0, -1.0], &[1.0, 1.0], &part, BlockMode::SumOfAbs).unwrap();
        assert_eq!(abs_sum[0].score, 0.0);
        assert_eq!(sum_abs[0].score, 2.0);

        let single = BlockPartition::singletons(3);
        let theta = [2.0, -1.5, 0.0];
        let g = [0.5, 2.0, 3.0];
        let scores: Vec<f64> = block_sensitivity(&theta, &g, &single, BlockMode::AbsOfSum)
            .unwrap()
            .into_iter()
            .map(|s| s.score)
            .collect();
        assert_eq!(scores, sensitivity(&theta, &g).unwrap());

        let whole = BlockPartition::new(
            vec![Block {
                name: "all".into(),
                range: 0..3,
            }],
            3,
        )
        .unwrap();
        assert_eq!(
            block_sensitivity(&theta, &[0.0; 3], &whole, BlockMode::AbsOfSum).unwrap()[0].score,
            0.0
        );
    }

    #[test]
    fn variation_trace_statistics() {
        let mut rec = VariationRecorder::new();
        rec.record(1, &[0.0, 0.0, 0.0]);
        rec.record(2, &[1.0, 3.0]);
        assert_eq!(
            rec.points()[0],
            TracePoint {
                step: 1,
                mean: 0.0,
                variance: 0.0
            }
        );
        assert_eq!(
            rec.points()[1],
            TracePoint {
                step: 2,
                mean: 2.0,
                variance: 1.0
            }
        );

        let mut full = VariationRecorder::sampled(4, 4, 7);
        let mut plain = VariationRecorder::new();
        let u = [0.5, 1.5, 2.0, 0.25];
        full.record(3, &u);
        plain.record(3, &u);
        assert_eq!(full.points(), plain.points());
    }

    #[test]
    fn stats_by_hand() {
        let s = sensitivity_stats(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.variance, 1.25);
        let c = sensitivity_stats(&[0.7; 10]).unwrap();
        assert_eq!(c.variance, 0.0);
        assert_eq!(c.histogram.counts.iter().sum::<usize>(), 10);
        assert!(sensitivity_stats(&[]).is_err());

        let values: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let st = sensitivity_stats(&values).unwrap();
        let in_range = values
            .iter()
            .filter(|&&v| v >= st.histogram.lo && v <= st.histogram.hi)
            .count();
        assert_eq!(st.histogram.counts.iter().sum::<usize>(), in_range);
        assert_eq!(st.histogram.counts.len(), HISTOGRAM_BINS);
    }

    #[test]
    fn snapshot_rejects_negative() {
        assert!(SensitivitySnapshot::new(vec![1.0, -1.0], SnapshotSource::Minibatch, 0).is_err());
    }
}
