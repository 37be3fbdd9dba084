//! File writers for run directories.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{
    block_sensitivity, sensitivity_stats, write_block_csv, write_snapshot_csv, BlockMode,
    BlockPartition,
};
use crate::checkpoint;
use crate::error::{Result, SageError};
use crate::harness::sweeps::{GridCell, OverlapTable, PruneRow};
use crate::harness::train::{MetricsRecord, TrainingRun, METRICS_HEADER};
use crate::harness::RunReport;
use crate::nn::loss_and_grad;

fn csv_string<R, I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    csv_string(&METRICS_HEADER, records.iter().map(MetricsRecord::csv_row))
}

pub fn prune_csv(rows: &[PruneRow]) -> String {
    csv_string(
        &["ratio", "pruned", "val_acc", "delta"],
        rows.iter().map(|r| {
            [
                r.ratio.to_string(),
                r.pruned.to_string(),
                r.val_acc.to_string(),
                r.delta.to_string(),
            ]
        }),
    )
}

pub fn overlap_csv(table: &OverlapTable) -> String {
    csv_string(
        &[
            "subset_size",
            "n_subsets",
            "mean_overlap",
            "min_overlap",
            "max_overlap",
        ],
        table.rows.iter().map(|r| {
            [
                r.subset_size.to_string(),
                r.n_subsets.to_string(),
                r.mean_overlap.to_string(),
                r.min_overlap.to_string(),
                r.max_overlap.to_string(),
            ]
        }),
    )
}

pub fn grid_csv(cells: &[GridCell]) -> String {
    csv_string(
        &[
            "learning_rate",
            "beta0",
            "val_acc",
            "best_val_acc",
            "train_acc",
            "diverged",
        ],
        cells.iter().map(|c| {
            [
                c.learning_rate.to_string(),
                c.beta0.to_string(),
                c.val_acc.to_string(),
                c.best_val_acc.to_string(),
                c.train_acc.to_string(),
                c.diverged.to_string(),
            ]
        }),
    )
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SageError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SageError::io(dir, e))
}

/// Config echo, metrics, and summary; enough to see how far a failed run got.
pub fn write_partial(dir: &Path, run: &TrainingRun) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join("config.json"), &(run.config.to_json() + "\n"))?;
    write_text(&dir.join("metrics.csv"), &metrics_csv(&run.metrics))?;
    write_json(&dir.join("summary.json"), &run.summary)
}

/// Everything a finished run produced, including the final checkpoint.
pub fn write_run(dir: &Path, report: &RunReport) -> Result<()> {
    let run = &report.run;
    write_partial(dir, run)?;
    checkpoint::save(
        dir.join("checkpoint.bin"),
        &run.config.network,
        run.config.seed,
        &run.params,
    )?;
    if let Some(trace) = &run.trace {
        write_text(
            &dir.join("variation_trace.csv"),
            &csv_string(
                &["step", "u_mean", "u_var"],
                trace.iter().map(|p| {
                    [
                        p.step.to_string(),
                        p.mean.to_string(),
                        p.variance.to_string(),
                    ]
                }),
            ),
        )?;
    }
    if let Some(snapshot) = &run.snapshot {
        let partition = BlockPartition::from_network(&run.config.network);
        write_snapshot_csv(snapshot, &partition, dir.join("sensitivity.csv"))?;
        write_json(
            &dir.join("sensitivity_stats.json"),
            &sensitivity_stats(&snapshot.values)?,
        )?;
        let (_, grad) = loss_and_grad(&run.config.network, &run.params, &run.data.train)?;
        let blocks = block_sensitivity(
            run.params.as_slice(),
            grad.as_slice(),
            &partition,
            BlockMode::AbsOfSum,
        )?;
        write_block_csv(&blocks, dir.join("block_sensitivity.csv"))?;
    }
    if let Some(grid) = &report.boundary {
        grid.write(dir, Some(&run.data.train))?;
    }
    if let Some(rows) = &report.prune_curve {
        write_text(&dir.join("prune_curve.csv"), &prune_csv(rows))?;
    }
    Ok(())
}
