//! Loads a labelled CSV (any column order, string or integer labels) and
//! trains Adamax-SAGE on it through the same config the CLI reads.

use std::path::Path;

use sage::data::load_csv;
use sage::harness::{run_training, ExperimentConfig};

fn main() -> sage::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let raw = load_csv(dir.join("data/three_clusters.csv"), "kind")?;
    println!(
        "{} rows, {} features, classes {:?}",
        raw.len(),
        raw.input_dim(),
        {
            let mut seen = raw.labels().unwrap().to_vec();
            seen.sort_unstable();
            seen.dedup();
            seen
        }
    );

    let mut cfg = ExperimentConfig::load(dir.join("csv_clusters.json"))?;
    cfg.output_dir = None;
    let report = run_training(&cfg)?;
    let s = &report.run.summary;
    println!(
        "{}: {} steps, train acc {:.3}, val acc {:.3}",
        s.label, s.steps_completed, s.final_train_acc, s.final_val_acc
    );
    if let Some(rows) = report.prune_curve {
        for r in rows {
            println!("  pruned {:.0}%: val acc {:.3}", 100.0 * r.ratio, r.val_acc);
        }
    }
    Ok(())
}
