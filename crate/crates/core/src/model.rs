//! The attentive-fusion network: a shared per-row MLP over 4-channel
//! cluster features, followed by a per-row max over the output channels.
//! One score per neighbor row comes out; softmax over a cluster's rows
//! happens in the fusion module.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Cluster features are `[dx, dy, dz, |d|]`.
pub const FEATURE_DIM: usize = 4;

/// The standard layer-size chain: 4 input channels through hidden widths
/// 64, 64, 128.
pub const STANDARD_LAYER_SIZES: [usize; 4] = [FEATURE_DIM, 64, 64, 128];

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`, row-major semantics: output `z = W h + b` per feature row.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    layers: Vec<DenseLayer>,
}

impl FusionModel {
    /// Builds from explicit layers, validating the shape chain (first input
    /// dimension 4, consecutive dimensions matching, finite entries).
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        let mut prev = FEATURE_DIM;
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.ncols() != prev {
                return Err(Error::invalid(format!(
                    "layer {i} expects input {} but the chain provides {prev}",
                    layer.weights.ncols()
                )));
            }
            if layer.bias.len() != layer.weights.nrows() {
                return Err(Error::invalid(format!(
                    "layer {i} bias length {} != output size {}",
                    layer.bias.len(),
                    layer.weights.nrows()
                )));
            }
            if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
            prev = layer.weights.nrows();
        }
        Ok(Self { layers })
    }

    /// Seeded initialization: weights uniform in `±sqrt(6 / fan_in)`,
    /// biases zero.
    pub fn seeded(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid("layer size chain needs at least two entries"));
        }
        if sizes[0] != FEATURE_DIM {
            return Err(Error::invalid(format!(
                "input dimension must be {FEATURE_DIM}, got {}",
                sizes[0]
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weights =
                    DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..bound));
                DenseLayer { weights, bias: DVector::zeros(fan_out) }
            })
            .collect();
        Self::from_layers(layers)
    }

    /// The standard `[4, 64, 64, 128]` architecture.
    pub fn standard(seed: u64) -> Self {
        Self::seeded(&STANDARD_LAYER_SIZES, seed).expect("standard sizes are valid")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Runs the shared MLP on a batch of feature rows (`B x 4`) and reduces
    /// each row to a scalar score by max over the final channels. Returns
    /// the per-layer activations for backprop alongside the scores and the
    /// argmax channel per row (ties resolved to the lowest channel index).
    pub(crate) fn forward_batch(&self, features: DMatrix<f64>) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(features);
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut z = prev * layer.weights.transpose();
            for (mut col, b) in z.column_iter_mut().zip(layer.bias.iter()) {
                col.add_scalar_mut(*b);
            }
            z.apply(|v| *v = v.max(0.0)); // ReLU after every layer
            activations.push(z);
        }
        let last = activations.last().unwrap();
        let rows = last.nrows();
        let mut scores = Vec::with_capacity(rows);
        let mut argmax = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut best = f64::NEG_INFINITY;
            let mut best_c = 0;
            for c in 0..last.ncols() {
                let v = last[(r, c)];
                if v > best {
                    best = v;
                    best_c = c;
                }
            }
            scores.push(best);
            argmax.push(best_c);
        }
        ForwardCache { activations, scores, argmax }
    }

    /// Scores only, for inference paths that do not need the cache.
    pub fn row_scores(&self, features: DMatrix<f64>) -> Vec<f64> {
        self.forward_batch(features).scores
    }
}

/// Activations of a batched forward pass. `activations[0]` is the input
/// feature block; `activations[l + 1]` is the ReLU output of layer `l`.
pub(crate) struct ForwardCache {
    pub activations: Vec<DMatrix<f64>>,
    pub scores: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
