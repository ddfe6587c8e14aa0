//! Training of the fusion network against the Chamfer loss: exact
//! backpropagation through the weighted sum, softmax, channel max, and the
//! shared MLP, with an Adam optimizer. Flow estimation, sampling, and
//! neighbor assignments are constants of each step; gradients flow only
//! through the network parameters.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::flow::FlowEstimatorConfig;
use crate::fusion::{
    adaptive_knn_cluster, adaptive_sample, attentive_fuse, feature_block, warp_stage, Cluster,
    FusionConfig, TimeStep, FUSE_CHUNK,
};
use crate::chamfer::chamfer_loss_and_grad;
use crate::model::{softmax, FusionModel};
use crate::sample::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub points_per_frame: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 1,
            points_per_frame: 16384,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("adam betas must lie in (0, 1)"));
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::invalid("adam eps must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// One training example: two consecutive frames, the ground-truth
/// intermediate frame, and its time step.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub frame0: PointCloud,
    pub frame1: PointCloud,
    pub target: PointCloud,
    pub t: TimeStep,
}

impl TrainSample {
    pub fn new(
        frame0: PointCloud,
        frame1: PointCloud,
        target: PointCloud,
        t: TimeStep,
    ) -> Result<Self> {
        if frame0.len() != frame1.len() {
            return Err(Error::invalid(format!(
                "training frames must have equal sizes, got {} and {}",
                frame0.len(),
                frame1.len()
            )));
        }
        Ok(Self { frame0, frame1, target, t })
    }
}

/// Parameter gradients, shaped exactly like the model.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl ModelGrads {
    pub fn zeros_like(model: &FusionModel) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| {
                    (
                        DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                        DVector::zeros(l.bias.len()),
                    )
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()))
    }
}

/// Backpropagates per-output-point gradients through Eq.-style weighted
/// sums, the softmax, the channel max (subgradient to the argmax channel,
/// ties to the lowest index), and the shared MLP. `upstream[i]` is the loss
/// gradient with respect to fused point i.
///
/// The forward pass is recomputed chunk by chunk so memory stays bounded at
/// full frame sizes; chunk boundaries are fixed, which pins the
/// floating-point reduction order and keeps results run-to-run identical.
pub fn fusion_backward(
    clusters: &[Cluster],
    model: &FusionModel,
    upstream: &[Vector3<f64>],
) -> Result<ModelGrads> {
    if clusters.len() != upstream.len() {
        return Err(Error::invalid(format!(
            "upstream gradient count {} does not match cluster count {}",
            upstream.len(),
            clusters.len()
        )));
    }
    let mut grads = ModelGrads::zeros_like(model);
    let mut cluster_offset = 0;
    for chunk in clusters.chunks(FUSE_CHUNK) {
        let cache = model.forward_batch(feature_block(chunk));
        let rows = cache.scores.len();
        let mut dscores = vec![0.0; rows];
        let mut row = 0;
        for (ci, cluster) in chunk.iter().enumerate() {
            let k = cluster.size();
            let weights = softmax(&cache.scores[row..row + k]);
            let g = upstream[cluster_offset + ci];
            // d loss / d weight_k = g . x_k ; softmax Jacobian folds in the
            // usual w ⊙ (dw - <w, dw>) form.
            let dw: Vec<f64> = cluster.neighbors().iter().map(|x| g.dot(x)).collect();
            let inner: f64 = weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
            for k_i in 0..k {
                dscores[row + k_i] = weights[k_i] * (dw[k_i] - inner);
            }
            row += k;
        }

        // Route the score gradient into the argmax channel of the last
        // activation, then walk the layers backwards.
        let last_cols = cache.activations.last().unwrap().ncols();
        let mut dh = DMatrix::zeros(rows, last_cols);
        for r in 0..rows {
            dh[(r, cache.argmax[r])] = dscores[r];
        }
        for l in (0..model.layers().len()).rev() {
            let h_out = &cache.activations[l + 1];
            let mut dz = dh;
            dz.zip_apply(h_out, |d, h| {
                if h <= 0.0 {
                    *d = 0.0;
                }
            });
            grads.layers[l].0 += dz.transpose() * &cache.activations[l];
            grads.layers[l].1 += dz.row_sum().transpose();
            dh = if l > 0 {
                &dz * &model.layers()[l].weights
            } else {
                DMatrix::zeros(0, 0)
            };
        }
        cluster_offset += chunk.len();
    }
    Ok(grads)
}

/// Adam moment estimates, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<(DMatrix<f64>, DVector<f64>)>,
    pub v: Vec<(DMatrix<f64>, DVector<f64>)>,
    pub step: u64,
}

impl AdamState {
    pub fn zeros_like(model: &FusionModel) -> Self {
        let zeros = || {
            model
                .layers()
                .iter()
                .map(|l| {
                    (
                        DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                        DVector::zeros(l.bias.len()),
                    )
                })
                .collect::<Vec<_>>()
        };
        Self { m: zeros(), v: zeros(), step: 0 }
    }
}

/// One Adam update with bias correction. Deterministic given the state;
/// rejects non-finite gradients before touching the model.
pub fn adam_step(
    model: &mut FusionModel,
    grads: &ModelGrads,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    if grads.layers.len() != model.layers().len() {
        return Err(Error::invalid("gradient/model layer count mismatch"));
    }
    if !grads.is_finite() {
        return Err(Error::TrainingDiverged("non-finite gradients".into()));
    }
    let t = state.step + 1;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (l, layer) in model.layers_mut().iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[l];
        update_params(
            layer.weights.as_mut_slice(),
            gw.as_slice(),
            state.m[l].0.as_mut_slice(),
            state.v[l].0.as_mut_slice(),
            cfg,
            bc1,
            bc2,
        );
        update_params(
            layer.bias.as_mut_slice(),
            gb.as_slice(),
            state.m[l].1.as_mut_slice(),
            state.v[l].1.as_mut_slice(),
            cfg,
            bc1,
            bc2,
        );
    }
    state.step = t;
    Ok(())
}

fn update_params(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Sequential optimization loop over training samples. The flow estimator
/// is classical and carries no trainable state, so only the fusion network
/// learns.
pub struct Trainer {
    model: FusionModel,
    state: AdamState,
    pub flow_cfg: FlowEstimatorConfig,
    pub fusion_cfg: FusionConfig,
    pub train_cfg: TrainConfig,
}

impl Trainer {
    /// Fresh trainer with a seeded standard model.
    pub fn new(
        flow_cfg: FlowEstimatorConfig,
        fusion_cfg: FusionConfig,
        train_cfg: TrainConfig,
    ) -> Result<Self> {
        let model = FusionModel::standard(train_cfg.seed);
        Self::resume(model, None, flow_cfg, fusion_cfg, train_cfg)
    }

    /// Resumes from a checkpointed model and (optionally) optimizer state.
    /// With the same configs and sample stream, a resumed run reproduces
    /// the uninterrupted run bitwise.
    pub fn resume(
        model: FusionModel,
        state: Option<AdamState>,
        flow_cfg: FlowEstimatorConfig,
        fusion_cfg: FusionConfig,
        train_cfg: TrainConfig,
    ) -> Result<Self> {
        train_cfg.validate()?;
        fusion_cfg.validate()?;
        flow_cfg.validate()?;
        if fusion_cfg.ablate_attention {
            return Err(Error::invalid(
                "cannot train with attention ablated: no parameters in the path",
            ));
        }
        let state = state.unwrap_or_else(|| AdamState::zeros_like(&model));
        if state.m.len() != model.layers().len() {
            return Err(Error::invalid("optimizer state does not match model layout"));
        }
        Ok(Self { model, state, flow_cfg, fusion_cfg, train_cfg })
    }

    pub fn model(&self) -> &FusionModel {
        &self.model
    }

    pub fn into_model(self) -> FusionModel {
        self.model
    }

    pub fn optimizer_state(&self) -> &AdamState {
        &self.state
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// One optimization step on one sample; returns the Chamfer loss at the
    /// pre-update parameters.
    pub fn train_step(&mut self, sample: &TrainSample) -> Result<f64> {
        if sample.frame0.len() != sample.frame1.len() {
            return Err(Error::invalid("sample frames must have equal sizes"));
        }
        let mut step_cfg = self.fusion_cfg;
        step_cfg.seed = derive_seed(self.fusion_cfg.seed, self.state.step);

        let (w0, w1) = warp_stage(&sample.frame0, &sample.frame1, sample.t, &self.flow_cfg)?;
        let combined = adaptive_sample(&w0, &w1, sample.t, &step_cfg)?;
        let clusters = adaptive_knn_cluster(&combined, &w0, &w1, sample.t, &step_cfg)?;
        let fused = attentive_fuse(&clusters, &self.model, &step_cfg)?;

        let (loss, dpoints) = chamfer_loss_and_grad(&fused, &sample.target);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "loss became {loss} at step {}",
                self.state.step
            )));
        }
        let grads = fusion_backward(&clusters, &self.model, &dpoints)?;
        adam_step(&mut self.model, &grads, &mut self.state, &self.train_cfg)?;
        Ok(loss)
    }

    /// Runs up to `epochs * samples.len()` total steps, continuing from the
    /// current step counter (so resumed trainers pick up where they left
    /// off). Returns the per-step losses of this call.
    pub fn run(&mut self, samples: &[TrainSample]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::invalid("training requires at least one sample"));
        }
        let total = (self.train_cfg.epochs * samples.len()) as u64;
        let mut losses = Vec::new();
        while self.state.step < total {
            let sample = &samples[(self.state.step as usize) % samples.len()];
            losses.push(self.train_step(sample)?);
        }
        Ok(losses)
    }
}
