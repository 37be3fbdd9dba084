use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::error::{Result, SageError};
use crate::nn::{Activation, LossKind, NetworkSpec};
use crate::optim::{BaseOptimizer, OptimizerConfig};
use crate::schedule::{ScheduleKind, ScheduleSpec};

fn default_eval_every() -> u64 {
    100
}
fn default_resolution() -> usize {
    200
}
fn default_bounds() -> [f64; 4] {
    [-2.5, 2.5, -2.5, 2.5]
}
fn default_bottom_fraction() -> f64 {
    0.3
}
fn default_ratios() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3, 0.4]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningCurveSpec {
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    /// Parameter blocks left out of pruning; all bias blocks when absent.
    #[serde(default)]
    pub exclusions: Option<Vec<String>>,
}

impl Default for PruningCurveSpec {
    fn default() -> Self {
        PruningCurveSpec {
            ratios: default_ratios(),
            exclusions: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// `[x_min, x_max, y_min, y_max]` in (standardized) input coordinates.
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            bounds: default_bounds(),
            resolution: default_resolution(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    /// Record mean/variance of the local temporal variation every step.
    #[serde(default)]
    pub variation_trace: bool,
    /// Restrict the trace to a seeded random subset of this many parameters.
    #[serde(default)]
    pub trace_sample: Option<usize>,
    /// Full-training-set sensitivity snapshot of the final parameters.
    #[serde(default)]
    pub final_snapshot: bool,
    #[serde(default)]
    pub boundary_grid: Option<BoundarySpec>,
    #[serde(default)]
    pub pruning_curve: Option<PruningCurveSpec>,
}

/// Axes for the `overlap` and `grid` sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub learning_rates: Vec<f64>,
    #[serde(default)]
    pub beta0s: Vec<f64>,
    #[serde(default = "default_bottom_fraction")]
    pub bottom_fraction: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            learning_rates: Vec::new(),
            beta0s: Vec::new(),
            bottom_fraction: default_bottom_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub network: NetworkSpec,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleSpec,
    pub batch_size: usize,
    pub total_steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Seeds weight initialization and, unless `batch_seed` is set, minibatch order.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub batch_seed: Option<u64>,
    #[serde(default)]
    pub analyses: Analyses,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Spiral task with the 3x100 hidden-layer relu MLP and a constant-rate optimizer.
    pub fn spiral(optimizer: OptimizerConfig, peak_lr: f64, total_steps: u64, seed: u64) -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::spiral(seed),
            network: NetworkSpec {
                layer_dims: vec![2, 100, 100, 100, 3],
                activation: Activation::Relu,
                loss: LossKind::SoftmaxCrossEntropy,
            },
            optimizer,
            schedule: ScheduleSpec::constant(peak_lr),
            batch_size: 32,
            total_steps,
            eval_every: default_eval_every(),
            seed,
            batch_seed: None,
            analyses: Analyses::default(),
            sweep: SweepSpec::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| SageError::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            SageError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_json(&text)?;
        // A relative CSV path is taken relative to the config file.
        if let (Some(data), Some(dir)) = (cfg.dataset.path.as_mut(), path.parent()) {
            if data.is_relative() {
                *data = dir.join(&*data);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn batch_seed(&self) -> u64 {
        self.batch_seed.unwrap_or(self.seed)
    }

    /// Schedule with `total_steps` filled in from the run length when omitted.
    pub fn resolved_schedule(&self) -> ScheduleSpec {
        let mut s = self.schedule.clone();
        if s.total_steps.is_none() && s.kind == ScheduleKind::LinearWarmupDecay {
            s.total_steps = Some(self.total_steps);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.network.validate()?;
        self.optimizer.validate()?;
        if self.total_steps > 0 {
            self.resolved_schedule().validate()?;
        }
        if let Some(total) = self.resolved_schedule().total_steps {
            if total < self.total_steps {
                return Err(SageError::config(format!(
                    "schedule covers {total} steps but the run has {}",
                    self.total_steps
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(SageError::config("batch_size must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(SageError::config("eval_every must be at least 1"));
        }
        if self.network.loss != LossKind::SoftmaxCrossEntropy {
            return Err(SageError::config(
                "the experiment harness trains classifiers only",
            ));
        }
        if let Some(p) = &self.analyses.pruning_curve {
            if let Some(r) = p.ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
                return Err(SageError::config(format!(
                    "pruning ratio {r} outside [0, 1)"
                )));
            }
        }
        if let Some(b) = &self.analyses.boundary_grid {
            if b.resolution < 2 {
                return Err(SageError::config("boundary resolution must be at least 2"));
            }
        }
        Ok(())
    }

    /// Copy with the optimizer's base learning rate replaced.
    pub fn with_lr(&self, lr: f64) -> Self {
        let mut c = self.clone();
        c.schedule.peak_lr = lr;
        c
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(
            self.optimizer.base,
            BaseOptimizer::Adam | BaseOptimizer::Adamax
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dataset": {"kind": "spiral", "n_per_class": 20},
        "network": {"layer_dims": [2, 8, 3], "activation": "relu", "loss": "softmax_cross_entropy"},
        "optimizer": {"base": "adam", "sage_enabled": true},
        "schedule": {"kind": "constant", "peak_lr": 0.01},
        "batch_size": 8,
        "total_steps": 10
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.eval_every, 100);
        assert_eq!(c.optimizer.beta0, 0.7);
        assert_eq!(c.dataset.n_classes, 3);
        assert_eq!(c.sweep.bottom_fraction, 0.3);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("\"batch_size\"", "\"batchsize\"");
        assert!(matches!(
            ExperimentConfig::from_json(&typo),
            Err(SageError::Config(_))
        ));
        let nested = MINIMAL.replace("\"sage_enabled\"", "\"sage_enable\"");
        assert!(ExperimentConfig::from_json(&nested).is_err());
    }

    #[test]
    fn schedule_must_cover_run() {
        let short = MINIMAL.replace(
            r#"{"kind": "constant", "peak_lr": 0.01}"#,
            r#"{"kind": "linear_warmup_decay", "peak_lr": 0.01, "warmup_steps": 2, "total_steps": 5}"#,
        );
        assert!(ExperimentConfig::from_json(&short).is_err());
        let implicit = MINIMAL.replace(
            r#"{"kind": "constant", "peak_lr": 0.01}"#,
            r#"{"kind": "linear_warmup_decay", "peak_lr": 0.01, "warmup_steps": 2}"#,
        );
        let c = ExperimentConfig::from_json(&implicit).unwrap();
        assert_eq!(c.resolved_schedule().total_steps, Some(10));
    }
}
