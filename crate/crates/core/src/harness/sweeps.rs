use serde::{Deserialize, Serialize};

use crate::analysis::{
    full_data_sensitivity, prune_by_sensitivity, redundancy_overlap, BlockPartition, Exclusions,
    PruneMask, SensitivitySnapshot,
};
use crate::data::generate;
use crate::error::{Result, SageError};
use crate::harness::config::ExperimentConfig;
use crate::harness::output;
use crate::harness::train::{train, TrainingOutcome, TrainingRun};
use crate::harness::RunReport;
use crate::nn::{evaluate, ParameterVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRow {
    pub ratio: f64,
    pub pruned: usize,
    pub val_acc: f64,
    /// `val_acc` minus the unpruned model's accuracy.
    pub delta: f64,
}

pub(crate) fn prune_exclusions(cfg: &ExperimentConfig) -> Result<Exclusions> {
    let partition = BlockPartition::from_network(&cfg.network);
    match cfg
        .analyses
        .pruning_curve
        .as_ref()
        .and_then(|p| p.exclusions.as_ref())
    {
        Some(names) => partition.exclusions(names),
        None => Ok(Exclusions::biases(&partition)),
    }
}

/// Prunes `params` at each ratio using a given snapshot; rows sorted by ratio.
pub fn pruning_curve_with_snapshot(
    cfg: &ExperimentConfig,
    params: &ParameterVector,
    snapshot: &SensitivitySnapshot,
    ratios: &[f64],
) -> Result<(Vec<PruneRow>, Vec<PruneMask>)> {
    let data = generate(&cfg.dataset)?;
    let exclusions = prune_exclusions(cfg)?;
    let mut ratios = ratios.to_vec();
    ratios.sort_by(f64::total_cmp);
    let (_, base) = evaluate(&cfg.network, params, &data.validation)?;
    let base = base.unwrap_or(f64::NAN);
    let mut rows = Vec::with_capacity(ratios.len());
    let mut masks = Vec::with_capacity(ratios.len());
    for ratio in ratios {
        let (pruned, mask) = prune_by_sensitivity(params, snapshot, ratio, &exclusions)?;
        let acc = if mask.pruned_count() == 0 {
            base
        } else {
            evaluate(&cfg.network, &pruned, &data.validation)?
                .1
                .unwrap_or(f64::NAN)
        };
        rows.push(PruneRow {
            ratio,
            pruned: mask.pruned_count(),
            val_acc: acc,
            delta: acc - base,
        });
        masks.push(mask);
    }
    Ok((rows, masks))
}

/// One-shot pruning by full-training-set sensitivity at each ratio.
pub fn pruning_curve(
    cfg: &ExperimentConfig,
    params: &ParameterVector,
    ratios: &[f64],
) -> Result<Vec<PruneRow>> {
    let data = generate(&cfg.dataset)?;
    let snapshot = full_data_sensitivity(&cfg.network, params, &data.train, 0)?;
    Ok(pruning_curve_with_snapshot(cfg, params, &snapshot, ratios)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub subset_size: usize,
    pub n_subsets: usize,
    pub mean_overlap: f64,
    pub min_overlap: f64,
    pub max_overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRunInfo {
    pub learning_rate: f64,
    pub batch_seed: u64,
    pub final_val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub bottom_fraction: f64,
    /// Always "intersection_over_set_size".
    pub normalization: String,
    pub runs: Vec<OverlapRunInfo>,
    pub rows: Vec<OverlapRow>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Overlap statistics for every subset size `2..=K` of the given snapshots.
pub fn overlap_table(
    snapshots: &[SensitivitySnapshot],
    bottom_fraction: f64,
) -> Result<Vec<OverlapRow>> {
    let k = snapshots.len();
    if k < 2 {
        return Err(SageError::config("overlap needs at least two runs"));
    }
    let mut rows = Vec::new();
    for size in 2..=k {
        let values = combinations(k, size)
            .into_iter()
            .map(|subset| {
                let refs: Vec<&SensitivitySnapshot> =
                    subset.iter().map(|&i| &snapshots[i]).collect();
                redundancy_overlap(&refs, bottom_fraction)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(OverlapRow {
            subset_size: size,
            n_subsets: values.len(),
            mean_overlap: values.iter().sum::<f64>() / values.len() as f64,
            min_overlap: values.iter().copied().fold(f64::INFINITY, f64::min),
            max_overlap: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(rows)
}

/// Writes a sweep member's run directory when the sweep has an output directory.
fn persist(cfg: &ExperimentConfig, outcome: &TrainingOutcome) -> Result<()> {
    let Some(dir) = &cfg.output_dir else {
        return Ok(());
    };
    if outcome.failure.is_some() {
        return output::write_partial(dir, &outcome.run);
    }
    let report = RunReport {
        run: outcome.run.clone(),
        boundary: None,
        prune_curve: None,
    };
    output::write_run(dir, &report)
}

/// Minibatch seed for one sweep run: shared for equal learning rates, distinct otherwise.
pub fn sweep_batch_seed(base_seed: u64, lr: f64) -> u64 {
    base_seed ^ lr.to_bits().rotate_left(17)
}

/// Trains one model per learning rate from a shared initialization and
/// reports how much their low-sensitivity parameter sets overlap.
pub fn overlap_sweep(
    base: &ExperimentConfig,
    learning_rates: &[f64],
) -> Result<(OverlapTable, Vec<TrainingRun>)> {
    if learning_rates.len() < 2 {
        return Err(SageError::config(
            "overlap sweep needs at least two learning rates",
        ));
    }
    let fraction = base.sweep.bottom_fraction;
    let mut runs = Vec::with_capacity(learning_rates.len());
    for (i, &lr) in learning_rates.iter().enumerate() {
        let mut cfg = base.with_lr(lr);
        cfg.batch_seed = Some(sweep_batch_seed(base.batch_seed(), lr));
        cfg.analyses.final_snapshot = true;
        cfg.output_dir = base
            .output_dir
            .as_ref()
            .map(|d| d.join(format!("run_{i:03}")));
        let outcome = train(&cfg)?;
        persist(&cfg, &outcome)?;
        runs.push(outcome.into_result()?);
    }
    let snapshots: Vec<SensitivitySnapshot> = runs
        .iter()
        .map(|r| r.snapshot.clone().expect("final snapshot requested"))
        .collect();
    let rows = overlap_table(&snapshots, fraction)?;
    let infos = runs
        .iter()
        .map(|r| OverlapRunInfo {
            learning_rate: r.config.schedule.peak_lr,
            batch_seed: r.config.batch_seed(),
            final_val_acc: r.summary.final_val_acc,
        })
        .collect();
    Ok((
        OverlapTable {
            bottom_fraction: fraction,
            normalization: "intersection_over_set_size".into(),
            runs: infos,
            rows,
        },
        runs,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub beta0: f64,
    /// NaN when the cell diverged.
    pub val_acc: f64,
    pub best_val_acc: f64,
    pub train_acc: f64,
    pub diverged: bool,
}

/// One run per `(learning_rate, beta0)` pair, learning rate outermost.
/// A diverging cell is recorded with NaN accuracy and the sweep continues.
pub fn grid_search(
    base: &ExperimentConfig,
    learning_rates: &[f64],
    beta0s: &[f64],
) -> Result<Vec<GridCell>> {
    if learning_rates.is_empty() || beta0s.is_empty() {
        return Err(SageError::config("grid axes must be non-empty"));
    }
    let mut cells = Vec::with_capacity(learning_rates.len() * beta0s.len());
    for &lr in learning_rates {
        for &beta0 in beta0s {
            let mut cfg = base.with_lr(lr);
            cfg.optimizer.beta0 = beta0;
            cfg.output_dir = base
                .output_dir
                .as_ref()
                .map(|d| d.join(format!("cell_{:03}", cells.len())));
            let outcome = train(&cfg)?;
            persist(&cfg, &outcome)?;
            let diverged = outcome.failure.is_some();
            let s = &outcome.run.summary;
            cells.push(GridCell {
                learning_rate: lr,
                beta0,
                val_acc: if diverged { f64::NAN } else { s.final_val_acc },
                best_val_acc: if diverged { f64::NAN } else { s.best_val_acc },
                train_acc: if diverged {
                    f64::NAN
                } else {
                    s.final_train_acc
                },
                diverged,
            });
        }
    }
    Ok(cells)
}

/// The non-diverged cell with the highest validation accuracy; ties go to the earlier cell.
pub fn best_cell(cells: &[GridCell]) -> Option<&GridCell> {
    cells
        .iter()
        .filter(|c| !c.diverged && c.val_acc.is_finite())
        .fold(None, |best: Option<&GridCell>, c| match best {
            Some(b) if b.val_acc >= c.val_acc => Some(b),
            _ => Some(c),
        })
}
