//! The lightweight MLP regressor: rectifier hidden layers, identity
//! output, trained with mini-batch gradient descent on mean squared error.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{model_inputs, EstimatorError, TrainRecord, UncertaintyScore};
use crate::util::substream;

/// One dense layer; `weights` is row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Feed-forward regressor with a scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(AdamConfig),
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam(AdamConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-4,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

/// Outcome of a training run: full-dataset MSE after each epoch, plus how
/// many re-seeded attempts were needed before the curve ended at or below
/// its start.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub attempts: u32,
    pub seed_used: u64,
}

impl MlpRegressor {
    /// Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)).
    pub fn new(dims: &[usize], seed: u64) -> MlpRegressor {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(*dims.last().unwrap(), 1, "regressor output must be scalar");
        assert!(dims.iter().all(|&d| d > 0));
        let mut rng = substream(seed, "init");
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        MlpRegressor {
            dims: dims.to_vec(),
            layers,
            seed,
        }
    }

    /// All-zero network of the given shape (useful for fixtures).
    pub fn zeros(dims: &[usize]) -> MlpRegressor {
        let mut model = MlpRegressor::new(dims, 0);
        for layer in &mut model.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        model
    }

    pub fn from_layers(dims: Vec<usize>, layers: Vec<Layer>, seed: u64) -> MlpRegressor {
        assert_eq!(dims.len(), layers.len() + 1);
        for (i, layer) in layers.iter().enumerate() {
            assert_eq!(layer.in_dim, dims[i]);
            assert_eq!(layer.out_dim, dims[i + 1]);
            assert_eq!(layer.weights.len(), layer.in_dim * layer.out_dim);
            assert_eq!(layer.biases.len(), layer.out_dim);
        }
        MlpRegressor { dims, layers, seed }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        let l = &mut self.layers[layer];
        l.weights[row * l.in_dim + col] = value;
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, value: f64) {
        self.layers[layer].biases[row] = value;
    }

    /// Raw forward pass (no clamping).
    pub fn forward(&self, input: &[f64]) -> f64 {
        assert_eq!(input.len(), self.input_dim());
        let mut acts = input.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0f64; layer.out_dim];
            for (o, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, a) in row.iter().zip(&acts) {
                    z += w * a;
                }
                *out = if li == last { z } else { z.max(0.0) };
            }
            acts = next;
        }
        acts[0]
    }

    /// Predicted output length, clamped below at zero.
    pub fn predict_value(&self, input: &[f64]) -> f64 {
        self.forward(input).max(0.0)
    }

    /// Prediction as an [`UncertaintyScore`], normalized by the profile's
    /// recorded ceiling.
    pub fn predict(&self, input: &[f64], u_max: f64) -> UncertaintyScore {
        UncertaintyScore::from_value(self.predict_value(input), u_max)
    }

    /// Full-dataset mean squared error against raw (unclamped) outputs.
    pub fn mse(&self, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        assert_eq!(inputs.len(), targets.len());
        assert!(!inputs.is_empty());
        inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| {
                let e = self.forward(x) - y;
                e * e
            })
            .sum::<f64>()
            / inputs.len() as f64
    }

    // Flat parameter view: layer by layer, weights then biases.

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn get_param(&self, mut index: usize) -> f64 {
        for layer in &self.layers {
            if index < layer.weights.len() {
                return layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                layer.weights[index] = value;
                return;
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                layer.biases[index] = value;
                return;
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    fn apply_flat_update(&mut self, mut f: impl FnMut(usize, f64) -> f64) {
        let mut idx = 0;
        for layer in &mut self.layers {
            for w in &mut layer.weights {
                *w = f(idx, *w);
                idx += 1;
            }
            for b in &mut layer.biases {
                *b = f(idx, *b);
                idx += 1;
            }
        }
    }

    /// Mean-squared-error loss and its gradient (flat layout matching
    /// [`MlpRegressor::get_param`]) over the given samples.
    pub fn loss_and_gradients(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(inputs.len(), targets.len());
        assert!(!inputs.is_empty());
        let n = inputs.len() as f64;
        let last = self.layers.len() - 1;

        let mut grads = vec![0.0f64; self.param_count()];
        // Flat offset of each layer's parameter block.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.weights.len() + layer.biases.len();
        }

        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            // Forward pass keeping activations (post-nonlinearity) per layer.
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
            acts.push(x.clone());
            for (li, layer) in self.layers.iter().enumerate() {
                let prev = &acts[li];
                let mut next = vec![0.0f64; layer.out_dim];
                for (o, out) in next.iter_mut().enumerate() {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let mut z = layer.biases[o];
                    for (w, a) in row.iter().zip(prev) {
                        z += w * a;
                    }
                    *out = if li == last { z } else { z.max(0.0) };
                }
                acts.push(next);
            }
            let pred = acts[self.layers.len()][0];
            let err = pred - y;
            loss += err * err / n;

            // Backward pass. delta holds dL/dz for the current layer.
            let mut delta = vec![2.0 * err / n];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let prev = &acts[li];
                let base = offsets[li];
                for (o, d) in delta.iter().enumerate() {
                    let wbase = base + o * layer.in_dim;
                    for (i, a) in prev.iter().enumerate() {
                        grads[wbase + i] += d * a;
                    }
                    grads[base + layer.weights.len() + o] += d;
                }
                if li == 0 {
                    break;
                }
                // Propagate through W and the rectifier of the layer below.
                let mut prev_delta = vec![0.0f64; layer.in_dim];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (i, pd) in prev_delta.iter_mut().enumerate() {
                        *pd += d * row[i];
                    }
                }
                for (pd, a) in prev_delta.iter_mut().zip(prev) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
        (loss, grads)
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    cfg: AdamConfig,
}

impl AdamState {
    fn new(n: usize, cfg: AdamConfig) -> AdamState {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            cfg,
        }
    }

    fn step(&mut self, model: &mut MlpRegressor, grads: &[f64], lr: f64) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let (m, v, eps) = (&mut self.m, &mut self.v, self.cfg.epsilon);
        model.apply_flat_update(|i, w| {
            let g = grads[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w - lr * m_hat / (v_hat.sqrt() + eps)
        });
    }
}

/// Trains the regressor on the given records with mini-batch descent.
///
/// Returns the trained model and the per-epoch training-loss curve. On
/// datasets of at least 32 records the curve is required to end at or
/// below its start; if an attempt violates that, training restarts from a
/// fresh init with the next seed, up to three attempts, keeping the
/// best-ending attempt.
pub fn mlp_train(
    model: MlpRegressor,
    records: &[TrainRecord],
    cfg: &TrainConfig,
) -> Result<(MlpRegressor, TrainReport), EstimatorError> {
    assert!(!records.is_empty(), "training needs at least one record");
    assert!(cfg.batch_size > 0);
    let with_len = model.input_dim() == crate::textfeat::FEATURE_COUNT + 1;
    let inputs: Vec<Vec<f64>> = records
        .iter()
        .map(|r| model_inputs(&r.features, r.input_len, with_len))
        .collect();
    let targets: Vec<f64> = records.iter().map(|r| r.target_len as f64).collect();

    let dims = model.dims.clone();
    let max_attempts = if records.len() >= 32 { 3 } else { 1 };
    let mut best: Option<(MlpRegressor, TrainReport)> = None;

    for attempt in 0..max_attempts {
        let candidate = if attempt == 0 {
            model.clone()
        } else {
            MlpRegressor::new(&dims, model.seed + attempt as u64)
        };
        let train_seed = cfg.seed + attempt as u64;
        let (trained, losses) = train_attempt(candidate, &inputs, &targets, cfg, train_seed)?;
        let ok = losses.is_empty() || losses[losses.len() - 1] <= losses[0];
        let report = TrainReport {
            epoch_losses: losses,
            attempts: attempt + 1,
            seed_used: train_seed,
        };
        let final_loss = report.epoch_losses.last().copied().unwrap_or(0.0);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                final_loss < b.epoch_losses.last().copied().unwrap_or(f64::INFINITY)
            }
        };
        if better {
            best = Some((trained, report));
        }
        if ok {
            break;
        }
    }
    Ok(best.expect("at least one attempt ran"))
}

fn train_attempt(
    mut model: MlpRegressor,
    inputs: &[Vec<f64>],
    targets: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(MlpRegressor, Vec<f64>), EstimatorError> {
    let mut rng = substream(seed, "train");
    let mut adam = match cfg.optimizer {
        Optimizer::Adam(a) => Some(AdamState::new(model.param_count(), a)),
        Optimizer::Sgd => None,
    };
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let batch_y: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&batch_x, &batch_y);
            if !loss.is_finite() {
                return Err(EstimatorError::NonFiniteLoss { epoch });
            }
            match &mut adam {
                Some(state) => state.step(&mut model, &grads, cfg.learning_rate),
                None => model.apply_flat_update(|i, w| w - cfg.learning_rate * grads[i]),
            }
        }
        let epoch_loss = model.mse(inputs, targets);
        if !epoch_loss.is_finite() {
            return Err(EstimatorError::NonFiniteLoss { epoch });
        }
        losses.push(epoch_loss);
    }
    Ok((model, losses))
}
