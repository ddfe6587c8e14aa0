//! Command implementations and the helpers they share.

pub mod baseline;
pub mod evaluate;
pub mod interpolate;
pub mod profile;
pub mod synth;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use cloudinterp::flow::{
    baseline_align_icp, baseline_flow_only, baseline_identity, FlowEstimatorConfig,
};
use cloudinterp::fusion::{interpolate_at, FusionConfig};
use cloudinterp::model::FusionModel;
use cloudinterp::sample::derive_seed;
use cloudinterp::PointCloud;

use crate::io::checkpoint::Checkpoint;

/// Interpolation method: the fusion pipeline or one of the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Fusion,
    Identity,
    AlignIcp,
    FlowOnly,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fusion => "fusion",
            Method::Identity => "identity",
            Method::AlignIcp => "align-icp",
            Method::FlowOnly => "flow-only",
        }
    }

    /// Produces the intermediate frame estimate at `t` in (0, 1).
    pub fn estimate(
        &self,
        p0: &PointCloud,
        p1: &PointCloud,
        t: f64,
        flow_cfg: &FlowEstimatorConfig,
        fusion_cfg: &FusionConfig,
        model: &FusionModel,
    ) -> cloudinterp::Result<PointCloud> {
        match self {
            Method::Fusion => interpolate_at(p0, p1, t, flow_cfg, fusion_cfg, model),
            Method::Identity => Ok(baseline_identity(p0)),
            Method::AlignIcp => baseline_align_icp(p0, p1, t, flow_cfg),
            Method::FlowOnly => baseline_flow_only(p0, p1, t, flow_cfg),
        }
    }
}

/// Loads a checkpointed model, or falls back to a seeded untrained one.
pub fn load_model_or_default(path: Option<&Path>, seed: u64) -> Result<FusionModel> {
    match path {
        Some(p) => {
            let ckpt = Checkpoint::load(p)
                .with_context(|| format!("loading checkpoint {}", p.display()))?;
            Ok(ckpt.model)
        }
        None => Ok(FusionModel::standard(seed)),
    }
}

/// Downsamples a frame to at most `budget` points with a per-frame seed so
/// parallel or reordered frame processing stays deterministic.
pub fn downsample_frame(
    cloud: &PointCloud,
    budget: usize,
    global_seed: u64,
    frame_index: u64,
) -> cloudinterp::Result<PointCloud> {
    if cloud.len() <= budget {
        return Ok(cloud.clone());
    }
    cloud.random_sample(budget, derive_seed(global_seed, frame_index))
}

/// Equalizes a frame pair to a common size `<= budget` (the pipeline
/// requires equal frame sizes).
pub fn downsample_pair(
    p0: &PointCloud,
    p1: &PointCloud,
    budget: usize,
    global_seed: u64,
    idx0: u64,
    idx1: u64,
) -> cloudinterp::Result<(PointCloud, PointCloud)> {
    let m = budget.min(p0.len()).min(p1.len());
    let a = if p0.len() == m { p0.clone() } else { p0.random_sample(m, derive_seed(global_seed, idx0))? };
    let b = if p1.len() == m { p1.clone() } else { p1.random_sample(m, derive_seed(global_seed, idx1))? };
    Ok((a, b))
}
