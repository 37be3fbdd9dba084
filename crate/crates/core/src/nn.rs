//! Dense multilayer-perceptron forward/backward engine.
//!
//! All parameters of a network live in one flat [`ParameterVector`]. The
//! flattening order (layout version [`LAYOUT_VERSION`]) is layer-major; within
//! a layer the weight matrix comes first, stored row-major with shape
//! `(fan_out, fan_in)`, followed by the `fan_out` biases. Gradients use the
//! same layout.
//!
//! Hidden layers apply the configured activation; the output layer is always
//! linear and feeds the loss directly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};

/// Tag written into checkpoints so a change in flattening order is detectable.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over samples of `-log softmax(z)[y]`.
    SoftmaxCrossEntropy,
    /// Mean over samples of `sum_k (z_k - y_k)^2`.
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
}

/// Offsets of one dense layer inside the flat parameter layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.weight_offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.fan_out
    }
}

impl NetworkSpec {
    pub fn new(layer_dims: Vec<usize>, activation: Activation, loss: LossKind) -> Result<Self> {
        let spec = NetworkSpec {
            layer_dims,
            activation,
            loss,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(SageError::config(format!(
                "layer_dims needs at least an input and an output size, got {:?}",
                self.layer_dims
            )));
        }
        if let Some(pos) = self.layer_dims.iter().position(|&d| d == 0) {
            return Err(SageError::config(format!(
                "layer_dims[{pos}] is zero; every layer needs at least one unit"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let shape = LayerShape {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                };
                offset += fan_in * fan_out + fan_out;
                shape
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Flat view of every trainable weight of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector(pub Vec<f64>);

/// Flat gradient with the same layout as [`ParameterVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

macro_rules! flat_vector {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(len: usize) -> Self {
                $ty(vec![0.0; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                $ty(v)
            }
        }
    };
}

flat_vector!(ParameterVector);
flat_vector!(GradientVector);

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// One class index per sample.
    Classes(Vec<usize>),
    /// Row-major `(n_samples, output_dim)` regression targets.
    Values { data: Vec<f64>, dim: usize },
}

/// A set of samples with row-major inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    input_dim: usize,
    targets: Targets,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, input_dim: usize, targets: Targets) -> Result<Self> {
        if input_dim == 0 {
            return Err(SageError::config("batch input_dim must be positive"));
        }
        if !inputs.len().is_multiple_of(input_dim) {
            return Err(SageError::config(format!(
                "{} input values do not form rows of width {input_dim}",
                inputs.len()
            )));
        }
        let n = inputs.len() / input_dim;
        if n == 0 {
            return Err(SageError::config("batch must contain at least one sample"));
        }
        let n_targets = match &targets {
            Targets::Classes(c) => c.len(),
            Targets::Values { data, dim } => {
                if *dim == 0 || data.len() % dim != 0 {
                    return Err(SageError::config("regression targets are not rectangular"));
                }
                data.len() / dim
            }
        };
        if n_targets != n {
            return Err(SageError::config(format!(
                "{n} input rows but {n_targets} targets"
            )));
        }
        Ok(Batch {
            inputs,
            input_dim,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes(c) => Some(c),
            Targets::Values { .. } => None,
        }
    }

    /// Gathers the given rows, in order, into a new batch.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            inputs.extend_from_slice(self.input_row(i));
        }
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(indices.iter().map(|&i| c[i]).collect()),
            Targets::Values { data, dim } => {
                let mut out = Vec::with_capacity(indices.len() * dim);
                for &i in indices {
                    out.extend_from_slice(&data[i * dim..(i + 1) * dim]);
                }
                Targets::Values {
                    data: out,
                    dim: *dim,
                }
            }
        };
        Batch {
            inputs,
            input_dim: self.input_dim,
            targets,
        }
    }

    /// Appends `other`'s samples after this batch's samples.
    pub fn concat(&self, other: &Batch) -> Result<Batch> {
        let targets = match (&self.targets, &other.targets) {
            (Targets::Classes(a), Targets::Classes(b)) => {
                Targets::Classes(a.iter().chain(b).copied().collect())
            }
            (Targets::Values { data: a, dim: da }, Targets::Values { data: b, dim: db })
                if da == db =>
            {
                Targets::Values {
                    data: a.iter().chain(b).copied().collect(),
                    dim: *da,
                }
            }
            _ => {
                return Err(SageError::config(
                    "cannot concatenate batches of different target kinds",
                ))
            }
        };
        let inputs = self.inputs.iter().chain(&other.inputs).copied().collect();
        Batch::new(inputs, self.input_dim, targets)
    }
}

/// Draws initial weights: He-uniform for relu, Glorot-uniform for tanh, zero biases.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<ParameterVector> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; spec.parameter_count()];
    for layer in spec.layers() {
        let bound = match spec.activation {
            Activation::Relu => (6.0 / layer.fan_in as f64).sqrt(),
            Activation::Tanh => (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt(),
        };
        for w in &mut params[layer.weight_range()] {
            *w = rng.gen_range(-bound..bound);
        }
    }
    Ok(ParameterVector(params))
}

fn check_shapes(spec: &NetworkSpec, params: &[f64], input_dim: usize) -> Result<()> {
    spec.validate()?;
    if params.len() != spec.parameter_count() {
        return Err(SageError::config(format!(
            "parameter vector has {} entries, network needs {}",
            params.len(),
            spec.parameter_count()
        )));
    }
    if input_dim != spec.input_dim() {
        return Err(SageError::config(format!(
            "inputs have width {input_dim}, network expects {}",
            spec.input_dim()
        )));
    }
    Ok(())
}

/// Runs the forward pass and returns the activations of every layer,
/// starting with the inputs themselves. The last entry holds the logits.
fn forward(spec: &NetworkSpec, params: &[f64], inputs: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    let layers = spec.layers();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(inputs.to_vec());
    for (l, layer) in layers.iter().enumerate() {
        let w = &params[layer.weight_range()];
        let b = &params[layer.bias_range()];
        let x = &acts[l];
        let is_output = l + 1 == layers.len();
        let mut z = vec![0.0; n * layer.fan_out];
        for i in 0..n {
            let xi = &x[i * layer.fan_in..(i + 1) * layer.fan_in];
            let zi = &mut z[i * layer.fan_out..(i + 1) * layer.fan_out];
            for (o, zo) in zi.iter_mut().enumerate() {
                let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                let dot: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
                let pre = dot + b[o];
                *zo = if is_output {
                    pre
                } else {
                    spec.activation.apply(pre)
                };
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(SageError::Numeric { layer: l });
        }
        acts.push(z);
    }
    Ok(acts)
}

/// Per-sample loss values and the gradient of the *mean* loss w.r.t. the logits.
fn loss_head(
    spec: &NetworkSpec,
    logits: &[f64],
    targets: &Targets,
    n: usize,
    want_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    let k = spec.output_dim();
    let mut dz = if want_grad {
        vec![0.0; n * k]
    } else {
        Vec::new()
    };
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    match (spec.loss, targets) {
        (LossKind::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
            for i in 0..n {
                let y = labels[i];
                if y >= k {
                    return Err(SageError::config(format!(
                        "class label {y} out of range for {k} outputs"
                    )));
                }
                let zi = &logits[i * k..(i + 1) * k];
                let max = zi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = zi.iter().map(|z| (z - max).exp()).sum();
                let lse = max + sum.ln();
                total += lse - zi[y];
                if want_grad {
                    let di = &mut dz[i * k..(i + 1) * k];
                    for (d, z) in di.iter_mut().zip(zi) {
                        *d = (z - lse).exp() * inv_n;
                    }
                    di[y] -= inv_n;
                }
            }
        }
        (LossKind::Mse, Targets::Values { data, dim }) => {
            if *dim != k {
                return Err(SageError::config(format!(
                    "regression targets have width {dim}, network outputs {k}"
                )));
            }
            for i in 0..n {
                for o in 0..k {
                    let r = logits[i * k + o] - data[i * k + o];
                    total += r * r;
                    if want_grad {
                        dz[i * k + o] = 2.0 * r * inv_n;
                    }
                }
            }
        }
        (loss, _) => {
            return Err(SageError::config(format!(
                "targets do not match loss kind {loss:?}"
            )))
        }
    }
    let loss = total * inv_n;
    if !loss.is_finite() {
        return Err(SageError::Numeric {
            layer: spec.num_layers() - 1,
        });
    }
    Ok((loss, dz))
}

/// Mean loss over the batch without computing gradients.
pub fn loss(spec: &NetworkSpec, params: &ParameterVector, batch: &Batch) -> Result<f64> {
    check_shapes(spec, params.as_slice(), batch.input_dim())?;
    let n = batch.len();
    let acts = forward(spec, params.as_slice(), batch.inputs(), n)?;
    let logits = acts.last().expect("at least one layer");
    Ok(loss_head(spec, logits, batch.targets(), n, false)?.0)
}

/// Mean loss over the batch and its exact gradient by reverse-mode backprop.
pub fn loss_and_grad(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
) -> Result<(f64, GradientVector)> {
    let theta = params.as_slice();
    check_shapes(spec, theta, batch.input_dim())?;
    let n = batch.len();
    let acts = forward(spec, theta, batch.inputs(), n)?;
    let layers = spec.layers();
    let (loss, mut delta) = loss_head(spec, &acts[layers.len()], batch.targets(), n, true)?;

    let mut grad = vec![0.0; theta.len()];
    for (l, layer) in layers.iter().enumerate().rev() {
        let x = &acts[l];
        let (fan_in, fan_out) = (layer.fan_in, layer.fan_out);
        {
            let (gw, gb) = grad[layer.weight_offset..layer.bias_offset + fan_out]
                .split_at_mut(fan_in * fan_out);
            for i in 0..n {
                let xi = &x[i * fan_in..(i + 1) * fan_in];
                let di = &delta[i * fan_out..(i + 1) * fan_out];
                for (o, &d) in di.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xv) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xi) {
                        *g += d * xv;
                    }
                }
            }
        }
        if l == 0 {
            break;
        }
        // Propagate to the previous layer's activations, then through its nonlinearity.
        let w = &theta[layer.weight_range()];
        let mut prev = vec![0.0; n * fan_in];
        for i in 0..n {
            let di = &delta[i * fan_out..(i + 1) * fan_out];
            let pi = &mut prev[i * fan_in..(i + 1) * fan_in];
            for (o, &d) in di.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in pi.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wv;
                }
            }
            for (p, a) in pi.iter_mut().zip(&x[i * fan_in..(i + 1) * fan_in]) {
                *p *= spec.activation.derivative_from_output(*a);
            }
        }
        delta = prev;
    }
    Ok((loss, GradientVector(grad)))
}

/// Central-difference gradient of the mean batch loss; entry `j` is
/// `(L(theta + h e_j) - L(theta - h e_j)) / 2h`.
pub fn finite_difference_grad(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
    h: f64,
) -> Result<GradientVector> {
    if h.is_nan() || h <= 0.0 {
        return Err(SageError::config(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.len()];
    for (j, g) in grad.iter_mut().enumerate() {
        let orig = probe.0[j];
        probe.0[j] = orig + h;
        let plus = loss(spec, &probe, batch)?;
        probe.0[j] = orig - h;
        let minus = loss(spec, &probe, batch)?;
        probe.0[j] = orig;
        *g = (plus - minus) / (2.0 * h);
    }
    Ok(GradientVector(grad))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictions {
    /// Argmax class per sample; ties go to the lowest index.
    Labels(Vec<usize>),
    /// Row-major raw outputs for regression networks.
    Values { data: Vec<f64>, dim: usize },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Labels(l) => l.len(),
            Predictions::Values { data, dim } => data.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Forward pass over row-major `inputs`.
pub fn predict(
    spec: &NetworkSpec,
    params: &ParameterVector,
    inputs: &[f64],
) -> Result<Predictions> {
    let d = spec.input_dim();
    if !inputs.len().is_multiple_of(d) {
        return Err(SageError::config(format!(
            "{} input values do not form rows of width {d}",
            inputs.len()
        )));
    }
    check_shapes(spec, params.as_slice(), d)?;
    let n = inputs.len() / d;
    let k = spec.output_dim();
    let acts = forward(spec, params.as_slice(), inputs, n)?;
    let logits = acts.into_iter().last().expect("at least one layer");
    Ok(match spec.loss {
        LossKind::SoftmaxCrossEntropy => {
            Predictions::Labels(logits.chunks(k).map(argmax).collect())
        }
        LossKind::Mse => Predictions::Values {
            data: logits,
            dim: k,
        },
    })
}

/// Class labels for a classification network.
pub fn predict_labels(
    spec: &NetworkSpec,
    params: &ParameterVector,
    inputs: &[f64],
) -> Result<Vec<usize>> {
    match predict(spec, params, inputs)? {
        Predictions::Labels(l) => Ok(l),
        Predictions::Values { .. } => Err(SageError::config("network is not a classifier")),
    }
}

/// Mean loss and, for classification batches, accuracy.
pub fn evaluate(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
) -> Result<(f64, Option<f64>)> {
    check_shapes(spec, params.as_slice(), batch.input_dim())?;
    let n = batch.len();
    let acts = forward(spec, params.as_slice(), batch.inputs(), n)?;
    let logits = acts.last().expect("at least one layer");
    let (loss, _) = loss_head(spec, logits, batch.targets(), n, false)?;
    let accuracy = match (spec.loss, batch.targets()) {
        (LossKind::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
            let k = spec.output_dim();
            let correct = logits
                .chunks(k)
                .zip(labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            Some(correct as f64 / n as f64)
        }
        _ => None,
    };
    Ok((loss, accuracy))
}
