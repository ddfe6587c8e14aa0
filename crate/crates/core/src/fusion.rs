//! Points fusion: adaptive sampling of the two warped clouds, adaptive kNN
//! clustering with 4-channel features, and attention-weighted neighbor sums
//! producing the intermediate frame. Each stage carries an ablation switch.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, interpolate_flow, warp, FlowEstimatorConfig};
use crate::index::SpatialIndex;
use crate::model::{softmax, FusionModel, FEATURE_DIM};
use crate::sample::{derive_seed, sample_indices};

/// Clusters per forward chunk; bounds the batched GEMM working set while
/// keeping the matrices large enough to be efficient.
pub(crate) const FUSE_CHUNK: usize = 256;

/// A time step strictly inside (0, 1). Frame boundaries are handled by the
/// pipeline entry point, not by the fusion stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeStep(f64);

impl TimeStep {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 && t < 1.0 {
            Ok(Self(t))
        } else {
            Err(Error::invalid(format!("time step {t} outside the open interval (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimeStep {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeStep> for f64 {
    fn from(t: TimeStep) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Cluster size K.
    pub k: usize,
    /// Sample N/2 points from each warped cloud instead of (1-t)N / tN.
    pub ablate_adaptive_sampling: bool,
    /// Query K/2 neighbors from each warped cloud instead of (1-t)K / tK.
    pub ablate_adaptive_knn: bool,
    /// Skip fusion entirely: the sampled union is the output.
    pub ablate_attention: bool,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            k: 32,
            ablate_adaptive_sampling: false,
            ablate_adaptive_knn: false,
            ablate_attention: false,
            seed: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("cluster size K must be >= 2"));
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Sample counts `(N0, N1)` for the two warped clouds: `N1 = round(t * N)`
/// and `N0 = N - N1`, so the frame closer in time contributes more points.
/// The ablated variant takes half from each and requires an even N.
pub fn sample_counts(n: usize, t: TimeStep, ablate: bool) -> Result<(usize, usize)> {
    if ablate {
        if !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "ablated sampling splits the cloud in half and needs an even size, got {n}"
            )));
        }
        return Ok((n / 2, n / 2));
    }
    let n1 = round_half_up(t.value() * n as f64).min(n);
    Ok((n - n1, n1))
}

/// Neighbor counts `(K0, K1)`: `K1 = round(t * K)` clamped to `[1, K-1]`
/// so both clouds always contribute at least one neighbor; `K0 = K - K1`.
/// The ablated variant splits K in half regardless of t.
pub fn knn_counts(k: usize, t: TimeStep, ablate: bool) -> (usize, usize) {
    if ablate {
        let k1 = k / 2;
        return (k - k1, k1);
    }
    let k1 = round_half_up(t.value() * k as f64).clamp(1, k - 1);
    (k - k1, k1)
}

/// Draws `N0` points from `w0` and `N1` from `w1` (uniformly, without
/// replacement, seeded) and concatenates them into the combined cloud.
pub fn adaptive_sample(
    w0: &PointCloud,
    w1: &PointCloud,
    t: TimeStep,
    cfg: &FusionConfig,
) -> Result<PointCloud> {
    cfg.validate()?;
    if w0.len() != w1.len() {
        return Err(Error::invalid(format!(
            "warped clouds must have equal sizes, got {} and {}",
            w0.len(),
            w1.len()
        )));
    }
    let n = w0.len();
    let (n0, n1) = sample_counts(n, t, cfg.ablate_adaptive_sampling)?;
    let idx0 = sample_indices(n, n0, derive_seed(cfg.seed, 0));
    let idx1 = sample_indices(n, n1, derive_seed(cfg.seed, 1));
    match (n0, n1) {
        (_, 0) => w0.select(&idx0),
        (0, _) => w1.select(&idx1),
        _ => Ok(w0.select(&idx0)?.concat(&w1.select(&idx1)?)),
    }
}

/// One fusion work unit: a center from the combined cloud, its K neighbors
/// drawn from the two warped clouds, and the per-neighbor features
/// `[x_k - x, |x_k - x|]`.
#[derive(Debug, Clone)]
pub struct Cluster {
    center: Vector3<f64>,
    neighbors: Vec<Vector3<f64>>,
    features: Vec<[f64; 4]>,
}

impl Cluster {
    pub fn new(center: Vector3<f64>, neighbors: Vec<Vector3<f64>>) -> Self {
        let features = neighbors
            .iter()
            .map(|p| {
                let d = p - center;
                [d.x, d.y, d.z, d.norm()]
            })
            .collect();
        Self { center, neighbors, features }
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn neighbors(&self) -> &[Vector3<f64>] {
        &self.neighbors
    }

    pub fn features(&self) -> &[[f64; 4]] {
        &self.features
    }

    pub fn size(&self) -> usize {
        self.neighbors.len()
    }
}

/// Builds one cluster per point of the combined cloud: the K0 nearest
/// neighbors from `w0` plus the K1 nearest from `w1`, each block ascending
/// by (distance, index).
pub fn adaptive_knn_cluster(
    combined: &PointCloud,
    w0: &PointCloud,
    w1: &PointCloud,
    t: TimeStep,
    cfg: &FusionConfig,
) -> Result<Vec<Cluster>> {
    cfg.validate()?;
    if w0.len() < cfg.k || w1.len() < cfg.k {
        return Err(Error::invalid(format!(
            "warped clouds must each hold at least K = {} points, got {} and {}",
            cfg.k,
            w0.len(),
            w1.len()
        )));
    }
    let (k0, k1) = knn_counts(cfg.k, t, cfg.ablate_adaptive_knn);
    let idx0 = SpatialIndex::build(w0);
    let idx1 = SpatialIndex::build(w1);
    let clusters = combined
        .iter()
        .map(|center| {
            let mut neighbors = Vec::with_capacity(cfg.k);
            if k0 > 0 {
                for (j, _) in idx0.knn(center, k0).expect("k0 <= |w0|") {
                    neighbors.push(w0.point(j));
                }
            }
            if k1 > 0 {
                for (j, _) in idx1.knn(center, k1).expect("k1 <= |w1|") {
                    neighbors.push(w1.point(j));
                }
            }
            Cluster::new(*center, neighbors)
        })
        .collect();
    Ok(clusters)
}

/// Attention weights for a single cluster: shared MLP per feature row, max
/// over the output channels, softmax over the cluster. Sums to 1.
pub fn attention_weights(model: &FusionModel, cluster: &Cluster) -> Vec<f64> {
    let features = feature_block(std::slice::from_ref(cluster));
    let scores = model.row_scores(features);
    softmax(&scores)
}

/// Packs the feature rows of a run of clusters into one `(sum K_i) x 4`
/// block for the batched MLP.
pub(crate) fn feature_block(clusters: &[Cluster]) -> DMatrix<f64> {
    let rows: usize = clusters.iter().map(|c| c.size()).sum();
    let mut block = DMatrix::zeros(rows, FEATURE_DIM);
    let mut r = 0;
    for cluster in clusters {
        for f in cluster.features() {
            for (c, v) in f.iter().enumerate() {
                block[(r, c)] = *v;
            }
            r += 1;
        }
    }
    block
}

/// Fuses every cluster into one output point: the softmax-weighted sum of
/// its neighbors' absolute coordinates. Order is preserved: output point i
/// comes from cluster i. With `ablate_attention` the cluster centers (the
/// sampled union) pass through unchanged.
pub fn attentive_fuse(
    clusters: &[Cluster],
    model: &FusionModel,
    cfg: &FusionConfig,
) -> Result<PointCloud> {
    cfg.validate()?;
    if clusters.is_empty() {
        return Err(Error::invalid("no clusters to fuse"));
    }
    if cfg.ablate_attention {
        return PointCloud::new(clusters.iter().map(|c| c.center()).collect());
    }
    let mut out = Vec::with_capacity(clusters.len());
    for chunk in clusters.chunks(FUSE_CHUNK) {
        let cache = model.forward_batch(feature_block(chunk));
        let mut row = 0;
        for cluster in chunk {
            let k = cluster.size();
            let weights = softmax(&cache.scores[row..row + k]);
            out.push(weighted_sum(cluster.neighbors(), &weights));
            row += k;
        }
    }
    PointCloud::new(out)
}

pub(crate) fn weighted_sum(points: &[Vector3<f64>], weights: &[f64]) -> Vector3<f64> {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| p * *w)
        .sum()
}

/// Warping stage of the pipeline: bi-directional flow estimation, linear
/// interpolation to `t`, and warping of both frames.
pub fn warp_stage(
    p0: &PointCloud,
    p1: &PointCloud,
    t: TimeStep,
    flow_cfg: &FlowEstimatorConfig,
) -> Result<(PointCloud, PointCloud)> {
    let f01 = estimate_flow(p0, p1, flow_cfg)?;
    let f10 = estimate_flow(p1, p0, flow_cfg)?;
    let (f0t, f1t) = interpolate_flow(&f01, &f10, t.value())?;
    Ok((warp(p0, &f0t)?, warp(p1, &f1t)?))
}

/// Fusion stage: sampling, clustering, and the attentive sum.
pub fn fusion_stage(
    w0: &PointCloud,
    w1: &PointCloud,
    t: TimeStep,
    cfg: &FusionConfig,
    model: &FusionModel,
) -> Result<PointCloud> {
    let combined = adaptive_sample(w0, w1, t, cfg)?;
    if cfg.ablate_attention {
        return Ok(combined);
    }
    let clusters = adaptive_knn_cluster(&combined, w0, w1, t, cfg)?;
    attentive_fuse(&clusters, model, cfg)
}

/// The full pipeline for one intermediate frame at `t` in (0, 1). Both
/// frames must have the same size N >= K; the output has exactly N points.
pub fn interpolate_frame(
    p0: &PointCloud,
    p1: &PointCloud,
    t: TimeStep,
    flow_cfg: &FlowEstimatorConfig,
    fusion_cfg: &FusionConfig,
    model: &FusionModel,
) -> Result<PointCloud> {
    fusion_cfg.validate()?;
    if p0.len() != p1.len() {
        return Err(Error::invalid(format!(
            "frames must have equal sizes, got {} and {}",
            p0.len(),
            p1.len()
        )));
    }
    if p0.len() < fusion_cfg.k {
        return Err(Error::invalid(format!(
            "frames of {} points cannot form clusters of K = {}",
            p0.len(),
            fusion_cfg.k
        )));
    }
    let (w0, w1) = warp_stage(p0, p1, t, flow_cfg)?;
    fusion_stage(&w0, &w1, t, fusion_cfg, model)
}

/// Boundary-aware entry point: `t = 0` and `t = 1` return the input frames
/// directly; interior steps run the full pipeline.
pub fn interpolate_at(
    p0: &PointCloud,
    p1: &PointCloud,
    t: f64,
    flow_cfg: &FlowEstimatorConfig,
    fusion_cfg: &FusionConfig,
    model: &FusionModel,
) -> Result<PointCloud> {
    if t == 0.0 {
        return Ok(p0.clone());
    }
    if t == 1.0 {
        return Ok(p1.clone());
    }
    interpolate_frame(p0, p1, TimeStep::new(t)?, flow_cfg, fusion_cfg, model)
}
