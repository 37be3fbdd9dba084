//! Parameter sensitivity, its moving average, the local temporal variation,
//! and the per-parameter learning-rate modulation built from them.
//!
//! One training step follows this order:
//!
//! 1. `I = |theta * g|` ([`sensitivity`])
//! 2. `Î <- beta0 * Î + (1 - beta0) * I` ([`SensitivityState::update`])
//! 3. `U = |I - Î|` against the already-updated average ([`local_temporal_variation`])
//! 4. `r = (U + eps) / (Î + eps)` ([`modulation`] with [`ModulationVariant::Sage`])
//!
//! The effective learning rate of parameter `j` is `base_lr * r_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-parameter `|theta_j * g_j|`.
pub fn sensitivity(params: &[f64], grads: &[f64]) -> Result<Vec<f64>> {
    if params.len() != grads.len() {
        return Err(SageError::config(format!(
            "sensitivity needs equal lengths, got {} parameters and {} gradients",
            params.len(),
            grads.len()
        )));
    }
    Ok(params
        .iter()
        .zip(grads)
        .map(|(t, g)| (t * g).abs())
        .collect())
}

/// Exponential moving average of sensitivity.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityState {
    pub ema: Vec<f64>,
    pub beta0: f64,
    pub epsilon: f64,
    pub step: u64,
}

impl SensitivityState {
    pub fn new(len: usize, beta0: f64, epsilon: f64) -> Result<Self> {
        validate_beta0(beta0)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(SageError::config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(SensitivityState {
            ema: vec![0.0; len],
            beta0,
            epsilon,
            step: 0,
        })
    }

    /// `ema <- beta0 * ema + (1 - beta0) * I`, then `step += 1`.
    pub fn update(&mut self, sensitivity: &[f64]) -> Result<()> {
        if sensitivity.len() != self.ema.len() {
            return Err(SageError::config(format!(
                "sensitivity has {} entries, state tracks {}",
                sensitivity.len(),
                self.ema.len()
            )));
        }
        if let Some(j) = sensitivity.iter().position(|&v| v.is_nan() || v < 0.0) {
            return Err(SageError::config(format!(
                "sensitivity must be a non-negative magnitude, entry {j} is {}",
                sensitivity[j]
            )));
        }
        let b = self.beta0;
        for (e, &i) in self.ema.iter_mut().zip(sensitivity) {
            *e = b * *e + (1.0 - b) * i;
        }
        self.step += 1;
        Ok(())
    }
}

pub(crate) fn validate_beta0(beta0: f64) -> Result<()> {
    if !(beta0 > 0.0 && beta0 < 1.0) {
        return Err(SageError::config(format!(
            "beta0 must lie in (0, 1), got {beta0}"
        )));
    }
    Ok(())
}

/// `U_j = |I_j - Î_j|`, with `Î` the moving average *after* this step's update.
pub fn local_temporal_variation(sensitivity: &[f64], ema: &[f64]) -> Vec<f64> {
    debug_assert_eq!(sensitivity.len(), ema.len());
    sensitivity
        .iter()
        .zip(ema)
        .map(|(i, e)| (i - e).abs())
        .collect()
}

/// Which learning-rate multiplier to build from `U` and `Î`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationVariant {
    /// `(U + eps) / (Î + eps)`
    #[default]
    Sage,
    /// `(Î + eps) * (U + eps)`
    V1Prod,
    /// `(Î + eps) / (U + eps)`
    V2Inv,
    /// `Î + eps`
    V3EmaOnly,
    /// `1 / (Î + eps)`
    V4InvEma,
    /// `U + eps`
    V5VarOnly,
    /// all ones
    Identity,
}

impl ModulationVariant {
    pub const ALL: [ModulationVariant; 7] = [
        ModulationVariant::Sage,
        ModulationVariant::V1Prod,
        ModulationVariant::V2Inv,
        ModulationVariant::V3EmaOnly,
        ModulationVariant::V4InvEma,
        ModulationVariant::V5VarOnly,
        ModulationVariant::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationVariant::Sage => "sage",
            ModulationVariant::V1Prod => "v1_prod",
            ModulationVariant::V2Inv => "v2_inv",
            ModulationVariant::V3EmaOnly => "v3_ema_only",
            ModulationVariant::V4InvEma => "v4_inv_ema",
            ModulationVariant::V5VarOnly => "v5_var_only",
            ModulationVariant::Identity => "identity",
        }
    }

    #[inline]
    pub fn factor(self, u: f64, ema: f64, epsilon: f64) -> f64 {
        match self {
            ModulationVariant::Sage => (u + epsilon) / (ema + epsilon),
            ModulationVariant::V1Prod => (ema + epsilon) * (u + epsilon),
            ModulationVariant::V2Inv => (ema + epsilon) / (u + epsilon),
            ModulationVariant::V3EmaOnly => ema + epsilon,
            ModulationVariant::V4InvEma => 1.0 / (ema + epsilon),
            ModulationVariant::V5VarOnly => u + epsilon,
            ModulationVariant::Identity => 1.0,
        }
    }
}

/// Per-parameter learning-rate multipliers.
pub fn modulation(u: &[f64], ema: &[f64], epsilon: f64, variant: ModulationVariant) -> Vec<f64> {
    debug_assert_eq!(u.len(), ema.len());
    u.iter()
        .zip(ema)
        .map(|(&u, &e)| variant.factor(u, e, epsilon))
        .collect()
}
