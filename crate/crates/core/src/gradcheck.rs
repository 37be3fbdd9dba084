//! Randomized comparison of backprop gradients against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::nn::{
    finite_difference_grad, init_network, loss_and_grad, Activation, Batch, LossKind, NetworkSpec,
    Targets,
};

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckCase {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
    pub batch_size: usize,
    /// `max_j |g_j - fd_j| / max(1, |fd_j|)`
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub h: f64,
    pub tolerance: f64,
    pub cases: Vec<GradcheckCase>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases
            .iter()
            .map(|c| c.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.max_rel_error < self.tolerance)
    }
}

pub fn max_rel_error(analytic: &[f64], reference: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(g, f)| (g - f).abs() / f.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// A random network no larger than `[5, 8, 8, 3]`, with a random batch.
pub fn random_problem(
    rng: &mut impl Rng,
) -> Result<(NetworkSpec, crate::nn::ParameterVector, Batch)> {
    let hidden = rng.gen_range(0..=2);
    let mut dims = vec![rng.gen_range(1..=5)];
    for _ in 0..hidden {
        dims.push(rng.gen_range(1..=8));
    }
    dims.push(rng.gen_range(1..=3));
    let activation = if rng.gen_bool(0.5) {
        Activation::Relu
    } else {
        Activation::Tanh
    };
    let loss = if rng.gen_bool(0.5) {
        LossKind::SoftmaxCrossEntropy
    } else {
        LossKind::Mse
    };
    let spec = NetworkSpec::new(dims, activation, loss)?;
    let mut params = init_network(&spec, rng.gen())?;
    for layer in spec.layers() {
        for b in &mut params.0[layer.bias_range()] {
            *b = 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let n = rng.gen_range(1..=6);
    let inputs: Vec<f64> = (0..n * spec.input_dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let k = spec.output_dim();
    let targets = match loss {
        LossKind::SoftmaxCrossEntropy => {
            Targets::Classes((0..n).map(|_| rng.gen_range(0..k)).collect())
        }
        LossKind::Mse => Targets::Values {
            data: (0..n * k).map(|_| rng.sample(StandardNormal)).collect(),
            dim: k,
        },
    };
    let batch = Batch::new(inputs, spec.input_dim(), targets)?;
    Ok((spec, params, batch))
}

/// Checks `trials` random problems at step `h` against `tolerance`.
pub fn run_suite(trials: usize, seed: u64, h: f64, tolerance: f64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (spec, params, batch) = random_problem(&mut rng)?;
        let (_, g) = loss_and_grad(&spec, &params, &batch)?;
        let fd = finite_difference_grad(&spec, &params, &batch, h)?;
        cases.push(GradcheckCase {
            layer_dims: spec.layer_dims.clone(),
            activation: spec.activation,
            loss: spec.loss,
            batch_size: batch.len(),
            max_rel_error: max_rel_error(g.as_slice(), fd.as_slice()),
        });
    }
    Ok(GradcheckReport {
        h,
        tolerance,
        cases,
    })
}
