//! Config-driven experiment runner.
//!
//! Every run directory holds `config.json` (the resolved config),
//! `metrics.csv`, `summary.json` and `checkpoint.bin`, plus whatever
//! analyses the config requested.

mod boundary;
mod config;
pub mod output;
mod sweeps;
mod train;

pub use boundary::{decision_boundary_grid, BoundaryGrid};
pub use config::{Analyses, BoundarySpec, ExperimentConfig, PruningCurveSpec, SweepSpec};
pub use sweeps::{
    best_cell, grid_search, overlap_sweep, overlap_table, pruning_curve,
    pruning_curve_with_snapshot, sweep_batch_seed, GridCell, OverlapRow, OverlapRunInfo,
    OverlapTable, PruneRow,
};
pub use train::{train, MetricsRecord, RunSummary, TrainingOutcome, TrainingRun, METRICS_HEADER};

use crate::error::Result;

/// A finished run together with the post-training analyses it asked for.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub run: TrainingRun,
    pub boundary: Option<BoundaryGrid>,
    pub prune_curve: Option<Vec<PruneRow>>,
}

/// Trains, runs the configured analyses, and writes the run directory when
/// `output_dir` is set. On divergence the partial metrics are still written
/// before the error is returned.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunReport> {
    let outcome = train(cfg)?;
    if let Some(err) = outcome.failure {
        if let Some(dir) = &cfg.output_dir {
            output::write_partial(dir, &outcome.run)?;
        }
        return Err(err);
    }
    let run = outcome.run;
    let boundary = match &cfg.analyses.boundary_grid {
        Some(b) => Some(decision_boundary_grid(
            &cfg.network,
            &run.params,
            b.bounds,
            b.resolution,
        )?),
        None => None,
    };
    let prune_curve = match &cfg.analyses.pruning_curve {
        Some(p) => Some(match &run.snapshot {
            Some(s) => pruning_curve_with_snapshot(cfg, &run.params, s, &p.ratios)?.0,
            None => pruning_curve(cfg, &run.params, &p.ratios)?,
        }),
        None => None,
    };
    let report = RunReport {
        run,
        boundary,
        prune_curve,
    };
    if let Some(dir) = &cfg.output_dir {
        output::write_run(dir, &report)?;
    }
    Ok(report)
}
