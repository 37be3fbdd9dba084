//! Base learning-rate schedules. Steps are 1-indexed.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    LinearWarmupDecay,
    InverseSqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub peak_lr: f64,
    #[serde(default)]
    pub warmup_steps: u64,
    /// Required for `linear_warmup_decay`; the harness fills it from the
    /// experiment's step budget when omitted.
    #[serde(default)]
    pub total_steps: Option<u64>,
}

impl ScheduleSpec {
    pub fn constant(peak_lr: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Constant,
            peak_lr,
            warmup_steps: 0,
            total_steps: None,
        }
    }

    pub fn linear_warmup_decay(peak_lr: f64, warmup_steps: u64, total_steps: u64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::LinearWarmupDecay,
            peak_lr,
            warmup_steps,
            total_steps: Some(total_steps),
        }
    }

    pub fn inverse_sqrt(peak_lr: f64, warmup_steps: u64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::InverseSqrt,
            peak_lr,
            warmup_steps,
            total_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(SageError::config(format!(
                "peak_lr must be positive and finite, got {}",
                self.peak_lr
            )));
        }
        if self.kind == ScheduleKind::LinearWarmupDecay {
            let total = self
                .total_steps
                .ok_or_else(|| SageError::config("linear_warmup_decay needs total_steps"))?;
            if total == 0 {
                return Err(SageError::config("total_steps must be positive"));
            }
            if self.warmup_steps > total {
                return Err(SageError::config(format!(
                    "warmup_steps {} exceeds total_steps {total}",
                    self.warmup_steps
                )));
            }
        }
        Ok(())
    }

    /// Learning rate for step `t`.
    ///
    /// The linear schedule reaches exactly zero at `t == total_steps`.
    pub fn base_lr(&self, t: u64) -> Result<f64> {
        self.validate()?;
        if t == 0 {
            return Err(SageError::config("schedule steps start at 1"));
        }
        if let Some(total) = self.total_steps {
            if t > total {
                return Err(SageError::config(format!(
                    "step {t} is past the schedule's total_steps {total}"
                )));
            }
        }
        let peak = self.peak_lr;
        let warm = self.warmup_steps;
        let lr = match self.kind {
            ScheduleKind::Constant => peak,
            _ if t <= warm => peak * t as f64 / warm as f64,
            ScheduleKind::LinearWarmupDecay => {
                let total = self.total_steps.expect("validated");
                peak * (total - t) as f64 / (total - warm) as f64
            }
            ScheduleKind::InverseSqrt => peak * (warm.max(1) as f64 / t as f64).sqrt().min(1.0),
        };
        Ok(lr)
    }
}
