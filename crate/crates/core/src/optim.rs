//! SGD, SGD with momentum, Adam and Adamax, each optionally modulated per
//! parameter by sensitivity.
//!
//! The sensitivity moving average is tracked on every step, whether or not
//! modulation is enabled, so that runs with and without it report the same
//! diagnostics. When modulation is disabled the multiplier is exactly `1.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::sensitivity::{validate_beta0, ModulationVariant, SensitivityState, DEFAULT_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseOptimizer {
    Sgd,
    SgdMomentum,
    Adam,
    Adamax,
}

/// How the modulated Adam update is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdamSageForm {
    /// `theta -= lr * r * m_hat / (sqrt(v_hat) + eps)`; reduces to Adam when `r == 1`.
    #[default]
    Corrected,
    /// Same as `Corrected` with an extra elementwise factor of the raw gradient.
    Verbatim,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCorrection {
    /// Divide by `1 - beta^t`.
    #[default]
    PowerT,
    /// Divide by `1 - beta`, independent of the step.
    OneMinusBeta,
}

impl BiasCorrection {
    fn denominator(self, beta: f64, t: u64) -> f64 {
        match self {
            BiasCorrection::PowerT => 1.0 - beta.powi(t.min(i32::MAX as u64) as i32),
            BiasCorrection::OneMinusBeta => 1.0 - beta,
        }
    }
}

fn default_beta0() -> f64 {
    0.7
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    DEFAULT_EPSILON
}
fn default_momentum() -> f64 {
    0.9
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub base: BaseOptimizer,
    #[serde(default)]
    pub sage_enabled: bool,
    #[serde(default)]
    pub variant: ModulationVariant,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon_opt: f64,
    #[serde(default = "default_eps")]
    pub epsilon_sage: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_true")]
    pub decoupled_decay: bool,
    #[serde(default)]
    pub grad_clip_norm: Option<f64>,
    #[serde(default)]
    pub adam_sage_update_form: AdamSageForm,
    #[serde(default)]
    pub bias_correction_form: BiasCorrection,
}

impl OptimizerConfig {
    pub fn new(base: BaseOptimizer) -> Self {
        OptimizerConfig {
            base,
            sage_enabled: false,
            variant: ModulationVariant::Sage,
            beta0: default_beta0(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon_opt: DEFAULT_EPSILON,
            epsilon_sage: DEFAULT_EPSILON,
            momentum: default_momentum(),
            weight_decay: 0.0,
            decoupled_decay: true,
            grad_clip_norm: None,
            adam_sage_update_form: AdamSageForm::Corrected,
            bias_correction_form: BiasCorrection::PowerT,
        }
    }

    /// Same base optimizer with modulation switched on.
    pub fn with_sage(mut self, variant: ModulationVariant, beta0: f64) -> Self {
        self.sage_enabled = true;
        self.variant = variant;
        self.beta0 = beta0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_beta0(self.beta0)?;
        for (name, b) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("momentum", self.momentum),
        ] {
            if !(0.0..1.0).contains(&b) {
                return Err(SageError::config(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        for (name, e) in [
            ("epsilon_opt", self.epsilon_opt),
            ("epsilon_sage", self.epsilon_sage),
        ] {
            if !(e > 0.0 && e.is_finite()) {
                return Err(SageError::config(format!(
                    "{name} must be positive, got {e}"
                )));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(SageError::config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(SageError::config(format!(
                    "grad_clip_norm must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// Human-readable label such as `adam-sage` or `sgd`.
    pub fn label(&self) -> String {
        let base = match self.base {
            BaseOptimizer::Sgd => "sgd",
            BaseOptimizer::SgdMomentum => "sgd_momentum",
            BaseOptimizer::Adam => "adam",
            BaseOptimizer::Adamax => "adamax",
        };
        match (self.sage_enabled, self.variant) {
            (false, _) => base.to_string(),
            (true, ModulationVariant::Sage) => format!("{base}-sage"),
            (true, v) => format!("{base}-{}", v.name()),
        }
    }
}

/// Per-parameter quantities from the most recent step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub sensitivity: Vec<f64>,
    pub variation: Vec<f64>,
    pub modulation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    /// First moment, or the momentum buffer for SGD with momentum.
    pub m: Vec<f64>,
    /// Second moment for Adam; infinity-norm accumulator `u` for Adamax.
    pub v: Vec<f64>,
    pub sens: SensitivityState,
    pub t: u64,
    pub last: StepDiagnostics,
}

impl OptimizerState {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Zero-initialized state for `param_count` parameters.
pub fn make_optimizer(config: &OptimizerConfig, param_count: usize) -> Result<OptimizerState> {
    config.validate()?;
    if param_count == 0 {
        return Err(SageError::config("optimizer needs at least one parameter"));
    }
    Ok(OptimizerState {
        m: vec![0.0; param_count],
        v: vec![0.0; param_count],
        sens: SensitivityState::new(param_count, config.beta0, config.epsilon_sage)?,
        t: 0,
        last: StepDiagnostics {
            sensitivity: vec![0.0; param_count],
            variation: vec![0.0; param_count],
            modulation: vec![1.0; param_count],
        },
    })
}

/// Applies one update in place.
///
/// `grads` is the raw loss gradient; it is clipped (when configured) before
/// both the sensitivity computation and the update.
pub fn step(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    base_lr: f64,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.len() != n {
        return Err(SageError::config(format!(
            "optimizer step shape mismatch: {} params, {} grads, state for {}",
            n,
            grads.len(),
            state.len()
        )));
    }
    if !(base_lr >= 0.0 && base_lr.is_finite()) {
        return Err(SageError::config(format!(
            "base learning rate must be non-negative, got {base_lr}"
        )));
    }
    state.t += 1;
    let t = state.t;
    if let Some(index) = grads.iter().position(|x| !x.is_finite()) {
        return Err(SageError::Divergence { step: t, index });
    }

    let mut g = grads.to_vec();
    if let Some(clip) = config.grad_clip_norm {
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > clip {
            let scale = clip / norm;
            g.iter_mut().for_each(|x| *x *= scale);
        }
    }

    // Sensitivity bookkeeping.
    {
        let last = &mut state.last;
        for ((s, th), gj) in last.sensitivity.iter_mut().zip(params.iter()).zip(&g) {
            *s = (th * gj).abs();
        }
        state.sens.update(&last.sensitivity)?;
    }
    let adaptive = matches!(config.base, BaseOptimizer::Adam | BaseOptimizer::Adamax);
    let ema_scale = if adaptive {
        1.0 / config.bias_correction_form.denominator(config.beta0, t)
    } else {
        1.0
    };
    let eps_s = config.epsilon_sage;
    {
        let last = &mut state.last;
        for j in 0..n {
            let ema = state.sens.ema[j] * ema_scale;
            let u = (last.sensitivity[j] - ema).abs();
            last.variation[j] = u;
            last.modulation[j] = if config.sage_enabled {
                config.variant.factor(u, ema, eps_s)
            } else {
                1.0
            };
        }
    }

    let wd = config.weight_decay;
    if wd > 0.0 && !config.decoupled_decay {
        for (gj, th) in g.iter_mut().zip(params.iter()) {
            *gj += wd * th;
        }
    }

    let r = &state.last.modulation;
    match config.base {
        BaseOptimizer::Sgd => {
            for j in 0..n {
                params[j] -= base_lr * r[j] * g[j];
            }
        }
        BaseOptimizer::SgdMomentum => {
            let mu = config.momentum;
            for j in 0..n {
                state.m[j] = mu * state.m[j] + g[j];
                params[j] -= base_lr * r[j] * state.m[j];
            }
        }
        BaseOptimizer::Adam => {
            let (b1, b2) = (config.beta1, config.beta2);
            let c1 = config.bias_correction_form.denominator(b1, t);
            let c2 = config.bias_correction_form.denominator(b2, t);
            let eps = config.epsilon_opt;
            let verbatim =
                config.sage_enabled && config.adam_sage_update_form == AdamSageForm::Verbatim;
            for j in 0..n {
                state.m[j] = b1 * state.m[j] + (1.0 - b1) * g[j];
                state.v[j] = b2 * state.v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = state.m[j] / c1;
                let v_hat = state.v[j] / c2;
                let mut delta = base_lr * r[j] * m_hat / (v_hat.sqrt() + eps);
                if verbatim {
                    delta *= g[j];
                }
                params[j] -= delta;
            }
        }
        BaseOptimizer::Adamax => {
            let (b1, b2) = (config.beta1, config.beta2);
            let c1 = config.bias_correction_form.denominator(b1, t);
            let eps = config.epsilon_opt;
            for j in 0..n {
                state.m[j] = b1 * state.m[j] + (1.0 - b1) * g[j];
                state.v[j] = (b2 * state.v[j]).max(g[j].abs());
                let m_hat = state.m[j] / c1;
                params[j] -= base_lr * r[j] * m_hat / (state.v[j] + eps);
            }
        }
    }

    if wd > 0.0 && config.decoupled_decay {
        let shrink = base_lr * wd;
        for th in params.iter_mut() {
            *th -= shrink * *th;
        }
    }

    if params.iter().any(|p| !p.is_finite()) {
        let index = params
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                let ka = if a.is_finite() {
                    a.abs()
                } else {
                    f64::INFINITY
                };
                let kb = if b.is_finite() {
                    b.abs()
                } else {
                    f64::INFINITY
                };
                ka.total_cmp(&kb)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        return Err(SageError::Divergence { step: t, index });
    }
    Ok(())
}
