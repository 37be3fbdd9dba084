use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    full_data_sensitivity, mean_and_variance, SensitivitySnapshot, TracePoint, VariationRecorder,
};
use crate::data::{generate, SplitDataset};
use crate::error::{Result, SageError};
use crate::harness::config::ExperimentConfig;
use crate::nn::{evaluate, init_network, loss_and_grad, ParameterVector};
use crate::optim::{make_optimizer, step};

/// Column order of `metrics.csv`.
pub const METRICS_HEADER: [&str; 10] = [
    "step",
    "train_loss",
    "val_loss",
    "val_acc",
    "base_lr",
    "mod_mean",
    "mod_var",
    "sens_mean",
    "sens_var",
    "u_mean",
];

/// One evaluation snapshot. Optimizer-derived columns describe the most
/// recent step and are NaN for the step-0 record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub base_lr: f64,
    pub mod_mean: f64,
    pub mod_var: f64,
    pub sens_mean: f64,
    pub sens_var: f64,
    pub u_mean: f64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> [String; 10] {
        [
            self.step.to_string(),
            self.train_loss.to_string(),
            self.val_loss.to_string(),
            self.val_acc.to_string(),
            self.base_lr.to_string(),
            self.mod_mean.to_string(),
            self.mod_var.to_string(),
            self.sens_mean.to_string(),
            self.sens_var.to_string(),
            self.u_mean.to_string(),
        ]
    }
}

/// Epoch-wise sampling without replacement; the order is reshuffled every
/// epoch and a trailing partial batch is dropped.
struct EpochSampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        EpochSampler {
            order,
            cursor: 0,
            batch: batch.min(n),
            rng,
        }
    }

    fn next(&mut self) -> &[usize] {
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let s = &self.order[self.cursor..self.cursor + self.batch];
        self.cursor += self.batch;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub parameter_count: usize,
    pub steps_completed: u64,
    pub final_train_loss: f64,
    pub final_train_acc: f64,
    pub final_val_loss: f64,
    pub final_val_acc: f64,
    /// Best validation accuracy over all evaluations, reported instead of early stopping.
    pub best_val_acc: f64,
    pub best_val_step: u64,
    /// Present when training stopped on a non-finite value.
    pub failure: Option<String>,
    pub variance_kind: String,
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub config: ExperimentConfig,
    pub data: SplitDataset,
    pub initial_params: ParameterVector,
    pub params: ParameterVector,
    pub metrics: Vec<MetricsRecord>,
    pub trace: Option<Vec<TracePoint>>,
    pub snapshot: Option<SensitivitySnapshot>,
    pub summary: RunSummary,
}

/// A run that may have stopped early on divergence.
#[derive(Debug)]
pub struct TrainingOutcome {
    pub run: TrainingRun,
    pub failure: Option<SageError>,
}

impl TrainingOutcome {
    pub fn into_result(self) -> Result<TrainingRun> {
        match self.failure {
            None => Ok(self.run),
            Some(e) => Err(e),
        }
    }
}

fn record(
    cfg: &ExperimentConfig,
    data: &SplitDataset,
    params: &ParameterVector,
    step_no: u64,
    base_lr: f64,
    last: Option<&crate::optim::StepDiagnostics>,
) -> Result<(MetricsRecord, f64)> {
    let (train_loss, train_acc) = evaluate(&cfg.network, params, &data.train)?;
    let (val_loss, val_acc) = evaluate(&cfg.network, params, &data.validation)?;
    let (mod_mean, mod_var, sens_mean, sens_var, u_mean) = match last {
        Some(d) => {
            let (mm, mv) = mean_and_variance(d.modulation.iter().copied());
            let (sm, sv) = mean_and_variance(d.sensitivity.iter().copied());
            let (um, _) = mean_and_variance(d.variation.iter().copied());
            (mm, mv, sm, sv, um)
        }
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    Ok((
        MetricsRecord {
            step: step_no,
            train_loss,
            val_loss,
            val_acc: val_acc.unwrap_or(f64::NAN),
            base_lr,
            mod_mean,
            mod_var,
            sens_mean,
            sens_var,
            u_mean,
        },
        train_acc.unwrap_or(f64::NAN),
    ))
}

/// Trains according to `cfg`, keeping everything in memory.
///
/// Configuration problems are returned as `Err`. A non-finite loss or
/// parameter stops training and is reported in [`TrainingOutcome::failure`]
/// together with the metrics gathered so far.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let data = generate(&cfg.dataset)?;
    if data.train.input_dim() != cfg.network.input_dim() {
        return Err(SageError::config(format!(
            "dataset has {} features, network expects {}",
            data.train.input_dim(),
            cfg.network.input_dim()
        )));
    }
    if data.n_classes > cfg.network.output_dim() {
        return Err(SageError::config(format!(
            "dataset has {} classes, network outputs {}",
            data.n_classes,
            cfg.network.output_dim()
        )));
    }
    let schedule = cfg.resolved_schedule();
    let initial = init_network(&cfg.network, cfg.seed)?;
    let mut params = initial.clone();
    let mut opt = make_optimizer(&cfg.optimizer, params.len())?;
    let mut sampler = EpochSampler::new(data.train.len(), cfg.batch_size, cfg.batch_seed());
    let mut tracer = cfg
        .analyses
        .variation_trace
        .then(|| match cfg.analyses.trace_sample {
            Some(k) => VariationRecorder::sampled(params.len(), k, cfg.seed),
            None => VariationRecorder::new(),
        });

    let mut metrics = Vec::new();
    let (first, mut train_acc) = record(cfg, &data, &params, 0, f64::NAN, None)?;
    metrics.push(first);
    let mut failure = None;
    let mut completed = 0;
    for t in 1..=cfg.total_steps {
        let lr = schedule.base_lr(t)?;
        let batch = data.train.select(sampler.next());
        let outcome = loss_and_grad(&cfg.network, &params, &batch).and_then(|(_, g)| {
            step(
                &cfg.optimizer,
                &mut opt,
                params.as_mut_slice(),
                g.as_slice(),
                lr,
            )
        });
        if let Err(e) = outcome {
            if e.is_divergence() {
                failure = Some(e);
                break;
            }
            return Err(e);
        }
        completed = t;
        if let Some(tr) = tracer.as_mut() {
            tr.record(t, &opt.last.variation);
        }
        if t % cfg.eval_every == 0 || t == cfg.total_steps {
            match record(cfg, &data, &params, t, lr, Some(&opt.last)) {
                Ok((m, acc)) => {
                    metrics.push(m);
                    train_acc = acc;
                }
                Err(e) if e.is_divergence() => {
                    failure = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let snapshot = if cfg.analyses.final_snapshot && failure.is_none() {
        Some(full_data_sensitivity(
            &cfg.network,
            &params,
            &data.train,
            completed,
        )?)
    } else {
        None
    };
    let last = *metrics.last().expect("initial record");
    let (best_val_step, best_val_acc) =
        metrics.iter().fold((0, f64::NEG_INFINITY), |(bs, ba), m| {
            if m.val_acc > ba {
                (m.step, m.val_acc)
            } else {
                (bs, ba)
            }
        });
    let summary = RunSummary {
        label: cfg.optimizer.label(),
        parameter_count: params.len(),
        steps_completed: completed,
        final_train_loss: last.train_loss,
        final_train_acc: train_acc,
        final_val_loss: last.val_loss,
        final_val_acc: if failure.is_some() {
            f64::NAN
        } else {
            last.val_acc
        },
        best_val_acc,
        best_val_step,
        failure: failure.as_ref().map(|e| e.to_string()),
        variance_kind: "population".into(),
    };
    Ok(TrainingOutcome {
        run: TrainingRun {
            config: cfg.clone(),
            data,
            initial_params: initial,
            params,
            metrics,
            trace: tracer.map(|t| t.points().to_vec()),
            snapshot,
            summary,
        },
        failure,
    })
}
