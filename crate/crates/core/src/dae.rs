//! Denoising autoencoder trained from scratch.
//!
//! Dense layers with sigmoid hidden activations and an identity output,
//! batch normalization between each hidden affine and its activation,
//! Gaussian input corruption `x̂ = x + s·t`, mean-squared reconstruction error
//! against the clean input, exact analytic backpropagation (including the
//! batch-statistics terms of batch norm), and Adam updates over seeded,
//! shuffled mini-batches. Training is a single sequential loop: identical
//! seeds give bitwise-identical models and loss histories.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::feature::{FeatureSchema, FeatureVector, Normalizer};
use crate::linalg::Matrix;
use crate::math;

/// Hidden layer widths of the reference architecture.
pub const DEFAULT_HIDDEN_DIMS: [usize; 3] = [50, 30, 50];

/// Epsilon inside the batch-norm divisor `sqrt(σ² + ε)`.
pub const BN_EPSILON: f64 = 1e-5;

/// Momentum of the exponential moving average tracking batch statistics.
pub const BN_MOMENTUM: f64 = 0.99;

#[derive(Clone, Debug, PartialEq)]
pub enum DaeError {
    ZeroDim,
    DimensionMismatch { expected: usize, got: usize },
    BatchTooSmall { got: usize },
    NotEnoughData { needed: usize, got: usize },
    NonFiniteLoss { epoch: usize, batch: usize },
    BadShape(String),
    BadConfig(String),
}

impl core::fmt::Display for DaeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DaeError::ZeroDim => write!(f, "feature schema has zero dimensions"),
            DaeError::DimensionMismatch { expected, got } => {
                write!(f, "input has dimension {got}, model expects {expected}")
            }
            DaeError::BatchTooSmall { got } => {
                write!(f, "batch statistics need at least 2 rows, got {got}")
            }
            DaeError::NotEnoughData { needed, got } => {
                write!(f, "need at least {needed} training vectors, got {got}")
            }
            DaeError::NonFiniteLoss { epoch, batch } => {
                write!(f, "training diverged: non-finite loss at epoch {epoch}, batch {batch}")
            }
            DaeError::BadShape(msg) => write!(f, "bad model shape: {msg}"),
            DaeError::BadConfig(msg) => write!(f, "bad training config: {msg}"),
        }
    }
}

impl core::error::Error for DaeError {}

/// Weights and bias of one dense layer; `weight` is `in_dim × out_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Per-unit batch-norm parameters and tracked statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_std: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BnParams {
    fn identity(units: usize) -> Self {
        Self {
            gamma: vec![1.0; units],
            beta: vec![0.0; units],
            running_mean: vec![0.0; units],
            running_std: vec![1.0; units],
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }
}

/// Seed, noise factor, and epoch count recorded by training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub noise_factor: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub noise_factor: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Epochs without improvement before stopping; 0 disables early stop.
    pub patience: usize,
    /// Minimum loss improvement that resets the patience counter.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            noise_factor: 0.1,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 120,
            max_epochs: 200,
            seed: 0,
            patience: 20,
            min_delta: 1e-7,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), DaeError> {
        if self.noise_factor < 0.0 {
            return Err(DaeError::BadConfig(String::from("noise factor must be >= 0")));
        }
        if self.batch_size < 2 {
            return Err(DaeError::BadConfig(String::from(
                "batch size must be >= 2 for batch statistics",
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(DaeError::BadConfig(String::from("learning rate must be > 0")));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss plus how training ended.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Forward caches for one hidden layer in train-batch mode.
#[derive(Clone, Debug)]
pub struct HiddenCache {
    /// Pre-normalization affine output.
    pub affine: Matrix,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// `1 / sqrt(var + ε)` per unit.
    pub inv_std: Vec<f64>,
    /// `(affine - mean) * inv_std`, before γ/β.
    pub normalized: Matrix,
    pub activation: Matrix,
}

/// Result of a train-mode batch forward pass.
#[derive(Clone, Debug)]
pub struct TrainForward {
    pub hidden: Vec<HiddenCache>,
    pub output: Matrix,
}

/// Gradients (or Adam moments) mirroring the model's parameter tensors.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub bn: Vec<BnGrad>,
}

#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BnGrad {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// The trained artifact: schema, normalizer, layer chain `D → hidden… → D`,
/// batch-norm state, and training metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DaeModel {
    schema: FeatureSchema,
    normalizer: Normalizer,
    layers: Vec<LayerParams>,
    bn: Vec<BnParams>,
    meta: Option<TrainMeta>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

impl DaeModel {
    /// Xavier-uniform initialization with the reference hidden widths.
    pub fn init(schema: FeatureSchema, normalizer: Normalizer, seed: u64) -> Result<Self, DaeError> {
        Self::init_with_dims(schema, normalizer, &DEFAULT_HIDDEN_DIMS, seed)
    }

    /// Xavier-uniform initialization (`±sqrt(6/(fan_in+fan_out))`), zero
    /// biases, identity batch norm. Deterministic for a given seed.
    pub fn init_with_dims(
        schema: FeatureSchema,
        normalizer: Normalizer,
        hidden_dims: &[usize],
        seed: u64,
    ) -> Result<Self, DaeError> {
        let d = schema.total_dim();
        if d == 0 {
            return Err(DaeError::ZeroDim);
        }
        if normalizer.dim() != d {
            return Err(DaeError::DimensionMismatch { expected: d, got: normalizer.dim() });
        }
        if hidden_dims.is_empty() || hidden_dims.contains(&0) {
            return Err(DaeError::BadShape(String::from("hidden dims must be non-empty and > 0")));
        }
        let mut dims = vec![d];
        dims.extend_from_slice(hidden_dims);
        dims.push(d);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let weight = Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit));
            layers.push(LayerParams { weight, bias: vec![0.0; fan_out] });
        }
        let bn = hidden_dims.iter().map(|&u| BnParams::identity(u)).collect();
        Ok(Self { schema, normalizer, layers, bn, meta: None })
    }

    /// Rebuilds a model from persisted parts, validating the layer chain.
    pub fn from_parts(
        schema: FeatureSchema,
        normalizer: Normalizer,
        layers: Vec<LayerParams>,
        bn: Vec<BnParams>,
        meta: Option<TrainMeta>,
    ) -> Result<Self, DaeError> {
        let d = schema.total_dim();
        if d == 0 {
            return Err(DaeError::ZeroDim);
        }
        if layers.is_empty() {
            return Err(DaeError::BadShape(String::from("no layers")));
        }
        if layers[0].weight.rows() != d {
            return Err(DaeError::DimensionMismatch { expected: d, got: layers[0].weight.rows() });
        }
        if normalizer.dim() != d {
            return Err(DaeError::DimensionMismatch { expected: d, got: normalizer.dim() });
        }
        for pair in layers.windows(2) {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(DaeError::BadShape(format!(
                    "layer chain breaks: {} -> {}",
                    pair[0].weight.cols(),
                    pair[1].weight.rows()
                )));
            }
        }
        let last = layers.last().unwrap();
        if last.weight.cols() != d {
            return Err(DaeError::BadShape(format!(
                "output dim {} != input dim {d}",
                last.weight.cols()
            )));
        }
        if bn.len() != layers.len() - 1 {
            return Err(DaeError::BadShape(format!(
                "{} batch-norm blocks for {} hidden layers",
                bn.len(),
                layers.len() - 1
            )));
        }
        for (layer, bn_params) in layers.iter().zip(bn.iter()) {
            let units = layer.weight.cols();
            if bn_params.gamma.len() != units
                || bn_params.beta.len() != units
                || bn_params.running_mean.len() != units
                || bn_params.running_std.len() != units
            {
                return Err(DaeError::BadShape(format!("batch-norm size != {units} units")));
            }
        }
        for layer in &layers {
            if !layer.weight.is_finite() || layer.bias.iter().any(|v| !v.is_finite()) {
                return Err(DaeError::BadShape(String::from("non-finite parameter")));
            }
        }
        for bn_params in &bn {
            if bn_params.running_std.iter().any(|&s| s.is_nan() || s < 0.0) {
                return Err(DaeError::BadShape(String::from("negative running std")));
            }
            if bn_params.epsilon.is_nan() || bn_params.epsilon <= 0.0 {
                return Err(DaeError::BadShape(String::from("batch-norm epsilon must be > 0")));
            }
            let m = bn_params.momentum;
            if m.is_nan() || m <= 0.0 || m >= 1.0 {
                return Err(DaeError::BadShape(String::from("momentum must be in (0, 1)")));
            }
        }
        Ok(Self { schema, normalizer, layers, bn, meta })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn bn(&self) -> &[BnParams] {
        &self.bn
    }

    /// Mutable parameter access for optimizers and gradient verification.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn bn_mut(&mut self) -> &mut [BnParams] {
        &mut self.bn
    }

    pub fn meta(&self) -> Option<&TrainMeta> {
        self.meta.as_ref()
    }

    pub fn set_meta(&mut self, meta: Option<TrainMeta>) {
        self.meta = meta;
    }

    pub fn input_dim(&self) -> usize {
        self.schema.total_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.weight.cols()).collect()
    }

    /// Eval-mode forward pass using tracked batch statistics. Pure: same
    /// input, same output, regardless of call order or batching.
    pub fn forward_eval(&self, x: &[f64]) -> Result<Vec<f64>, DaeError> {
        let d = self.input_dim();
        if x.len() != d {
            return Err(DaeError::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut current: Vec<f64> = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let units = layer.weight.cols();
            let mut z = layer.bias.clone();
            for (row, &input) in current.iter().enumerate() {
                let w_row = &layer.weight.data()[row * units..(row + 1) * units];
                for (acc, &w) in z.iter_mut().zip(w_row.iter()) {
                    *acc += input * w;
                }
            }
            if i < self.bn.len() {
                let bn = &self.bn[i];
                for (u, v) in z.iter_mut().enumerate() {
                    let denom = math::sqrt(bn.running_std[u] * bn.running_std[u] + bn.epsilon);
                    let normalized = (*v - bn.running_mean[u]) / denom;
                    *v = sigmoid(normalized * bn.gamma[u] + bn.beta[u]);
                }
            }
            current = z;
        }
        Ok(current)
    }

    /// Train-mode forward pass over a batch (≥ 2 rows), normalizing each
    /// hidden layer by its batch statistics and caching everything the
    /// backward pass needs. The output layer is affine with no batch norm.
    pub fn forward_train(&self, batch: &Matrix) -> Result<TrainForward, DaeError> {
        let d = self.input_dim();
        if batch.cols() != d {
            return Err(DaeError::DimensionMismatch { expected: d, got: batch.cols() });
        }
        if batch.rows() < 2 {
            return Err(DaeError::BatchTooSmall { got: batch.rows() });
        }
        let rows = batch.rows();
        let mut hidden = Vec::with_capacity(self.bn.len());
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut affine = current.matmul(&layer.weight);
            affine.add_row_bias(&layer.bias);
            if i == self.layers.len() - 1 {
                return Ok(TrainForward { hidden, output: affine });
            }
            let bn = &self.bn[i];
            let units = affine.cols();
            let mean = affine.column_means();
            let mut var = vec![0.0; units];
            for r in 0..rows {
                let row = affine.row(r);
                for (u, v) in var.iter_mut().enumerate() {
                    let d = row[u] - mean[u];
                    *v += d * d;
                }
            }
            for v in &mut var {
                *v /= rows as f64;
            }
            let inv_std: Vec<f64> =
                var.iter().map(|&v| 1.0 / math::sqrt(v + bn.epsilon)).collect();
            let normalized = Matrix::from_fn(rows, units, |r, u| {
                (affine.get(r, u) - mean[u]) * inv_std[u]
            });
            let activation = Matrix::from_fn(rows, units, |r, u| {
                sigmoid(normalized.get(r, u) * bn.gamma[u] + bn.beta[u])
            });
            current = activation.clone();
            hidden.push(HiddenCache { affine, mean, var, inv_std, normalized, activation });
        }
        unreachable!("loop always returns at the output layer")
    }

    /// Analytic gradients of the mean batch reconstruction loss with respect
    /// to every weight, bias, γ, and β, including the batch-statistics terms
    /// of batch norm. Returns the batch loss alongside.
    pub fn gradients(&self, clean: &Matrix, corrupted: &Matrix) -> Result<(f64, Gradients), DaeError> {
        if clean.rows() != corrupted.rows() || clean.cols() != corrupted.cols() {
            return Err(DaeError::DimensionMismatch {
                expected: clean.cols(),
                got: corrupted.cols(),
            });
        }
        let forward = self.forward_train(corrupted)?;
        let loss = batch_mse(clean, &forward.output);
        let grads = self.backward(clean, corrupted, &forward);
        Ok((loss, grads))
    }

    fn backward(&self, clean: &Matrix, corrupted: &Matrix, forward: &TrainForward) -> Gradients {
        let rows = clean.rows();
        let scale = 2.0 / (rows * clean.cols()) as f64;
        // d(loss)/d(output)
        let mut delta = Matrix::from_fn(rows, clean.cols(), |r, c| {
            scale * (forward.output.get(r, c) - clean.get(r, c))
        });

        let mut layer_grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut bn_grads: Vec<BnGrad> = Vec::with_capacity(self.bn.len());

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input: &Matrix = if i == 0 { corrupted } else { &forward.hidden[i - 1].activation };
            // `delta` holds d(loss)/d(affine output) of layer i.
            layer_grads.push(LayerGrad {
                weight: input.t_matmul(&delta),
                bias: delta.column_sums(),
            });
            if i == 0 {
                break;
            }

            // d(loss)/d(activation of layer i-1), then back through sigmoid
            // and batch norm to d(loss)/d(affine of layer i-1).
            let upstream = delta.matmul_t(&layer.weight);
            let cache = &forward.hidden[i - 1];
            let bn = &self.bn[i - 1];
            let units = cache.affine.cols();
            let n = rows as f64;

            // Through the sigmoid: dN = dH ⊙ H(1-H).
            let mut d_norm_out = Matrix::from_fn(rows, units, |r, u| {
                let h = cache.activation.get(r, u);
                upstream.get(r, u) * h * (1.0 - h)
            });

            let mut gamma_grad = vec![0.0; units];
            let mut beta_grad = vec![0.0; units];
            for r in 0..rows {
                for u in 0..units {
                    let g = d_norm_out.get(r, u);
                    gamma_grad[u] += g * cache.normalized.get(r, u);
                    beta_grad[u] += g;
                }
            }

            // dx̂ = dN·γ, then through the batch statistics μ and σ².
            for r in 0..rows {
                for u in 0..units {
                    let v = d_norm_out.get(r, u) * bn.gamma[u];
                    d_norm_out.set(r, u, v);
                }
            }
            let mut d_var = vec![0.0; units];
            let mut d_mean = vec![0.0; units];
            let mut centered_sum = vec![0.0; units];
            for r in 0..rows {
                for u in 0..units {
                    let centered = cache.affine.get(r, u) - cache.mean[u];
                    let inv = cache.inv_std[u];
                    d_var[u] += d_norm_out.get(r, u) * centered * (-0.5) * inv * inv * inv;
                    d_mean[u] += d_norm_out.get(r, u) * (-inv);
                    centered_sum[u] += centered;
                }
            }
            for u in 0..units {
                d_mean[u] += d_var[u] * (-2.0 / n) * centered_sum[u];
            }
            delta = Matrix::from_fn(rows, units, |r, u| {
                let centered = cache.affine.get(r, u) - cache.mean[u];
                d_norm_out.get(r, u) * cache.inv_std[u]
                    + d_var[u] * 2.0 * centered / n
                    + d_mean[u] / n
            });
            bn_grads.push(BnGrad { gamma: gamma_grad, beta: beta_grad });
        }

        layer_grads.reverse();
        bn_grads.reverse();
        Gradients { layers: layer_grads, bn: bn_grads }
    }

    /// Trains in place over normalized vectors: seeded shuffling, fresh
    /// Gaussian corruption per batch, Adam updates, batch-norm running
    /// statistics tracked by exponential moving average. Stops at
    /// `max_epochs` or when `patience` epochs pass without improvement.
    /// Mini-batches smaller than 2 rows are dropped.
    pub fn train(
        &mut self,
        vectors: &[FeatureVector],
        config: &TrainConfig,
    ) -> Result<TrainReport, DaeError> {
        config.validate()?;
        let d = self.input_dim();
        for v in vectors {
            if v.len() != d {
                return Err(DaeError::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        if vectors.len() < config.batch_size {
            return Err(DaeError::NotEnoughData { needed: config.batch_size, got: vectors.len() });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut adam = AdamState::new(self);
        let mut indices: Vec<usize> = (0..vectors.len()).collect();
        let mut history = Vec::new();
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        let mut stopped_early = false;
        let mut epochs_run = 0;

        for epoch in 0..config.max_epochs {
            indices.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut row_count = 0usize;
            for (batch_idx, chunk) in indices.chunks(config.batch_size).enumerate() {
                if chunk.len() < 2 {
                    continue;
                }
                let clean = gather(vectors, chunk);
                let corrupted = corrupt_matrix(&clean, config.noise_factor, &mut rng);
                let forward = self.forward_train(&corrupted)?;
                let loss = batch_mse(&clean, &forward.output);
                if !loss.is_finite() {
                    return Err(DaeError::NonFiniteLoss { epoch, batch: batch_idx });
                }
                let grads = self.backward(&clean, &corrupted, &forward);
                adam.step(self, &grads, config);
                self.update_running_stats(&forward);
                loss_sum += loss * chunk.len() as f64;
                row_count += chunk.len();
            }
            let epoch_loss = loss_sum / row_count as f64;
            history.push(epoch_loss);
            epochs_run = epoch + 1;
            if epoch_loss < best - config.min_delta {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if config.patience > 0 && stale >= config.patience {
                    stopped_early = true;
                    break;
                }
            }
        }

        self.meta = Some(TrainMeta {
            seed: config.seed,
            noise_factor: config.noise_factor,
            epochs_run,
        });
        Ok(TrainReport { loss_history: history, epochs_run, stopped_early })
    }

    fn update_running_stats(&mut self, forward: &TrainForward) {
        for (bn, cache) in self.bn.iter_mut().zip(forward.hidden.iter()) {
            let m = bn.momentum;
            for u in 0..bn.running_mean.len() {
                bn.running_mean[u] = m * bn.running_mean[u] + (1.0 - m) * cache.mean[u];
                bn.running_std[u] = m * bn.running_std[u] + (1.0 - m) * math::sqrt(cache.var[u]);
            }
        }
    }
}

/// Mean squared error over dimensions of one reconstruction pair.
pub fn mse(x_clean: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x_clean.len(), y.len(), "mse dimension mismatch");
    if x_clean.is_empty() {
        return 0.0;
    }
    let sum: f64 = x_clean.iter().zip(y.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    sum / x_clean.len() as f64
}

/// Mean squared error over every element of a batch (mean of per-row `mse`).
pub fn batch_mse(clean: &Matrix, output: &Matrix) -> f64 {
    assert_eq!(clean.rows(), output.rows());
    assert_eq!(clean.cols(), output.cols());
    let sum: f64 = clean
        .data()
        .iter()
        .zip(output.data().iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    sum / clean.data().len() as f64
}

/// `x̂ = x + s·t` with `t` i.i.d. standard Gaussian per component.
pub fn corrupt<R: Rng + ?Sized>(x: &[f64], noise_factor: f64, rng: &mut R) -> Vec<f64> {
    assert!(noise_factor >= 0.0, "noise factor must be non-negative");
    x.iter().map(|&v| v + noise_factor * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn corrupt_matrix(clean: &Matrix, noise_factor: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut out = clean.clone();
    if noise_factor > 0.0 {
        for v in out.data_mut() {
            *v += noise_factor * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

fn gather(vectors: &[FeatureVector], indices: &[usize]) -> Matrix {
    let rows: Vec<&[f64]> = indices.iter().map(|&i| vectors[i].as_slice()).collect();
    Matrix::from_rows(&rows)
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    beta1_power: f64,
    beta2_power: f64,
}

impl AdamState {
    fn new(model: &DaeModel) -> Self {
        let zeros = Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            bn: model
                .bn
                .iter()
                .map(|b| BnGrad { gamma: vec![0.0; b.gamma.len()], beta: vec![0.0; b.beta.len()] })
                .collect(),
        };
        Self { m: zeros.clone(), v: zeros, beta1_power: 1.0, beta2_power: 1.0 }
    }

    fn step(&mut self, model: &mut DaeModel, grads: &Gradients, config: &TrainConfig) {
        self.beta1_power *= config.beta1;
        self.beta2_power *= config.beta2;
        let bc1 = 1.0 - self.beta1_power;
        let bc2 = 1.0 - self.beta2_power;

        let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= config.learning_rate * m_hat / (math::sqrt(v_hat) + config.adam_epsilon);
            }
        };

        for ((layer, grad), (m, v)) in model
            .layers
            .iter_mut()
            .zip(grads.layers.iter())
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            update(layer.weight.data_mut(), grad.weight.data(), m.weight.data_mut(), v.weight.data_mut());
            update(&mut layer.bias, &grad.bias, &mut m.bias, &mut v.bias);
        }
        for ((bn, grad), (m, v)) in model
            .bn
            .iter_mut()
            .zip(grads.bn.iter())
            .zip(self.m.bn.iter_mut().zip(self.v.bn.iter_mut()))
        {
            update(&mut bn.gamma, &grad.gamma, &mut m.gamma, &mut v.gamma);
            update(&mut bn.beta, &grad.beta, &mut m.beta, &mut v.beta);
        }
    }
}


#[cfg(test)]
mod early_stop_tests {
    use super::*;
    use crate::feature::{standard_schema, BlockSource};

    #[test]
    fn patience_stops_a_plateaued_run() {
        let d = 4;
        let names: Vec<String> = (0..d).map(|i| format!("c{i}")).collect();
        let schema = standard_schema(&names, &[], &[], &[BlockSource::Categories]);
        let mut model =
            DaeModel::init_with_dims(schema, Normalizer::identity(d), &[8, 6, 8], 3).unwrap();
        let vectors: Vec<FeatureVector> = (0..80).map(|_| alloc::vec![0.25; d]).collect();
        let config = TrainConfig {
            noise_factor: 0.0,
            batch_size: 20,
            max_epochs: 500,
            patience: 5,
            min_delta: 1e-10,
            seed: 8,
            ..TrainConfig::default()
        };
        let report = model.train(&vectors, &config).unwrap();
        assert!(report.stopped_early, "expected the plateau to trigger early stop");
        assert!(report.epochs_run < 500);
        assert_eq!(report.loss_history.len(), report.epochs_run);
        assert_eq!(model.meta().unwrap().epochs_run, report.epochs_run);
    }
}
