//! Trains on the spiral and writes the predicted class over a lattice as CSV
//! and SVG, plus a checkpoint that reproduces the same picture.
//!
//! Usage: `cargo run --example decision_boundary [out_dir]`

use std::path::PathBuf;

use sage::checkpoint;
use sage::harness::{decision_boundary_grid, train, ExperimentConfig};
use sage::optim::{BaseOptimizer, OptimizerConfig};
use sage::sensitivity::ModulationVariant;

fn main() -> sage::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sage-boundary"));
    let opt = OptimizerConfig::new(BaseOptimizer::Adam).with_sage(ModulationVariant::Sage, 0.7);
    let mut cfg = ExperimentConfig::spiral(opt, 2e-3, 2000, 5);
    cfg.eval_every = 2000;
    let run = train(&cfg)?.into_result()?;

    let bounds = [-2.5, 2.5, -2.5, 2.5];
    let grid = decision_boundary_grid(&cfg.network, &run.params, bounds, 120)?;
    grid.write(&out, Some(&run.data.train))?;

    let ckpt = out.join("checkpoint.bin");
    checkpoint::save(&ckpt, &cfg.network, cfg.seed, &run.params)?;
    let (header, params) = checkpoint::load(&ckpt)?;
    let again = decision_boundary_grid(&header.network, &params, bounds, 120)?;
    assert_eq!(again.labels, grid.labels);

    // Grid accuracy on the training points, read off the nearest lattice cell.
    let labels = run.data.train.labels().expect("class targets");
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(i, &y)| {
            let p = run.data.train.input_row(*i);
            grid.label_near(p[0], p[1]) == y
        })
        .count();
    println!(
        "val acc {:.3}; lattice agrees with {hits}/{} training labels",
        run.summary.final_val_acc,
        labels.len()
    );
    println!("wrote {}", out.display());
    Ok(())
}
