use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sage::checkpoint;
use sage::gradcheck;
use sage::harness::output::{grid_csv, overlap_csv, prune_csv};
use sage::harness::{
    best_cell, decision_boundary_grid, grid_search, overlap_sweep, run_training, BoundarySpec,
    ExperimentConfig, PruningCurveSpec,
};
use sage::{Result, SageError};

#[derive(Parser)]
#[command(
    name = "sage",
    version,
    about = "Sensitivity-guided learning-rate experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its run directory.
    Train(Common),
    /// Train, then prune by full-data sensitivity at each configured ratio.
    PruneCurve(Common),
    /// Train one model per `sweep.learning_rates` and report bottom-set overlap.
    Overlap(Common),
    /// Learning-rate x beta0 grid of final validation accuracy.
    Grid(Common),
    /// Export the decision boundary of a trained (or freshly trained) model.
    Boundary {
        #[command(flatten)]
        common: Common,
        /// Use this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare backprop gradients against central differences on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(common: &Common, default_out: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from(default_out));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> &Path {
    cfg.output_dir.as_deref().expect("set by load")
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    std::fs::create_dir_all(path.parent().expect("file in a directory")).map_err(|e| {
        SageError::Io {
            path: path.clone(),
            source: e,
        }
    })?;
    std::fs::write(&path, text).map_err(|e| SageError::Io { path, source: e })
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = load(&c, "sage-out/train")?;
            let report = run_training(&cfg)?;
            if !c.quiet {
                let s = &report.run.summary;
                println!(
                    "{}: {} steps, train acc {:.4}, val acc {:.4} (best {:.4} at step {}) -> {}",
                    s.label,
                    s.steps_completed,
                    s.final_train_acc,
                    s.final_val_acc,
                    s.best_val_acc,
                    s.best_val_step,
                    out_dir(&cfg).display()
                );
            }
        }
        Command::PruneCurve(c) => {
            let mut cfg = load(&c, "sage-out/prune-curve")?;
            cfg.analyses.final_snapshot = true;
            cfg.analyses
                .pruning_curve
                .get_or_insert_with(PruningCurveSpec::default);
            let report = run_training(&cfg)?;
            let rows = report.prune_curve.expect("pruning curve requested");
            if !c.quiet {
                print!("{}", prune_csv(&rows));
            }
        }
        Command::Overlap(c) => {
            let cfg = load(&c, "sage-out/overlap")?;
            let (table, _) = overlap_sweep(&cfg, &cfg.sweep.learning_rates)?;
            write(out_dir(&cfg).join("overlap.csv"), &overlap_csv(&table))?;
            write(out_dir(&cfg).join("summary.json"), &json(&table))?;
            if !c.quiet {
                print!("{}", overlap_csv(&table));
            }
        }
        Command::Grid(c) => {
            let cfg = load(&c, "sage-out/grid")?;
            let lrs = if cfg.sweep.learning_rates.is_empty() {
                vec![cfg.schedule.peak_lr]
            } else {
                cfg.sweep.learning_rates.clone()
            };
            let betas = if cfg.sweep.beta0s.is_empty() {
                vec![cfg.optimizer.beta0]
            } else {
                cfg.sweep.beta0s.clone()
            };
            let cells = grid_search(&cfg, &lrs, &betas)?;
            write(out_dir(&cfg).join("grid.csv"), &grid_csv(&cells))?;
            write(
                out_dir(&cfg).join("summary.json"),
                &json(&serde_json::json!({ "cells": cells, "best": best_cell(&cells) })),
            )?;
            if !c.quiet {
                print!("{}", grid_csv(&cells));
            }
        }
        Command::Boundary {
            common,
            checkpoint: ckpt,
        } => {
            let mut cfg = load(&common, "sage-out/boundary")?;
            let spec = cfg
                .analyses
                .boundary_grid
                .get_or_insert_with(BoundarySpec::default)
                .clone();
            match ckpt {
                Some(path) => {
                    let (header, params) = checkpoint::load(&path)?;
                    let grid = decision_boundary_grid(
                        &header.network,
                        &params,
                        spec.bounds,
                        spec.resolution,
                    )?;
                    let data = sage::data::generate(&cfg.dataset)?;
                    grid.write(out_dir(&cfg), Some(&data.train))?;
                }
                None => {
                    run_training(&cfg)?;
                }
            }
            if !common.quiet {
                println!("boundary written to {}", out_dir(&cfg).display());
            }
        }
        Command::Gradcheck {
            trials,
            seed,
            h,
            out,
            quiet,
        } => {
            let report = gradcheck::run_suite(trials, seed, h, 1e-5)?;
            if let Some(dir) = out {
                write(dir.join("gradcheck.json"), &json(&report))?;
            }
            if !quiet {
                for (i, c) in report.cases.iter().enumerate() {
                    println!(
                        "case {i:2} dims {:?} {:?}/{:?} n={} max rel err {:.3e}",
                        c.layer_dims, c.activation, c.loss, c.batch_size, c.max_rel_error
                    );
                }
                println!(
                    "{} ({} cases, worst {:.3e}, tolerance {:.0e})",
                    if report.passed() { "PASS" } else { "FAIL" },
                    report.cases.len(),
                    report.max_rel_error(),
                    report.tolerance
                );
            }
            if !report.passed() {
                return Err(SageError::Numeric { layer: 0 });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
