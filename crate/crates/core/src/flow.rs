//! Scene flow between two frames: per-point 3D displacement fields,
//! linear interpolation to an intermediate time step, warping, and the
//! identity / align-ICP / flow-only baselines.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::icp::icp_register;
use crate::index::SpatialIndex;

/// Per-point displacement field, index-aligned with its source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFlow {
    displacements: Vec<Vector3<f64>>,
}

impl SceneFlow {
    pub fn new(displacements: Vec<Vector3<f64>>) -> Result<Self> {
        if displacements.is_empty() {
            return Err(Error::invalid("scene flow must cover at least one point"));
        }
        if !displacements.iter().all(|d| d.x.is_finite() && d.y.is_finite() && d.z.is_finite()) {
            return Err(Error::invalid("scene flow has non-finite displacements"));
        }
        Ok(Self { displacements })
    }

    pub fn zeros(count: usize) -> Result<Self> {
        Self::new(vec![Vector3::zeros(); count])
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn displacements(&self) -> &[Vector3<f64>] {
        &self.displacements
    }

    /// Elementwise scaling by `factor`.
    pub fn scaled(&self, factor: f64) -> SceneFlow {
        SceneFlow { displacements: self.displacements.iter().map(|d| d * factor).collect() }
    }

    pub fn negated(&self) -> SceneFlow {
        self.scaled(-1.0)
    }
}

/// Flow estimation method. `rigid-icp` fits one rigid motion to the whole
/// frame; `nn-smooth` builds a nearest-neighbor displacement field and
/// smooths it locally, at reduced fidelity but without the rigidity
/// assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMethod {
    RigidIcp,
    NnSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowEstimatorConfig {
    pub method: FlowMethod,
    pub icp_max_iterations: usize,
    pub icp_convergence_eps: f64,
    pub nn_smooth_neighbors: usize,
    pub nn_smooth_iterations: usize,
}

impl Default for FlowEstimatorConfig {
    fn default() -> Self {
        Self {
            method: FlowMethod::RigidIcp,
            icp_max_iterations: 50,
            icp_convergence_eps: 1e-5,
            nn_smooth_neighbors: 16,
            nn_smooth_iterations: 3,
        }
    }
}

impl FlowEstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.icp_max_iterations < 1 {
            return Err(Error::invalid("icp_max_iterations must be >= 1"));
        }
        if !self.icp_convergence_eps.is_finite() || self.icp_convergence_eps <= 0.0 {
            return Err(Error::invalid("icp_convergence_eps must be > 0"));
        }
        if self.nn_smooth_neighbors < 1 {
            return Err(Error::invalid("nn_smooth_neighbors must be >= 1"));
        }
        if self.nn_smooth_iterations < 1 {
            return Err(Error::invalid("nn_smooth_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Flow from a single rigid registration: `flow[i] = (R p_i + t) - p_i`.
pub fn estimate_flow_rigid(
    p0: &PointCloud,
    p1: &PointCloud,
    cfg: &FlowEstimatorConfig,
) -> Result<SceneFlow> {
    let (t, _) = icp_register(p0, p1, cfg)?;
    SceneFlow::new(p0.iter().map(|p| t.apply(p) - p).collect())
}

/// Nearest-neighbor flow with local averaging: the initial displacement of
/// each point is to its nearest neighbor in `p1`; each smoothing round
/// replaces a point's flow with the mean over its `nn_smooth_neighbors`
/// nearest neighbors in `p0` (the point itself included, being its own
/// nearest neighbor).
pub fn estimate_flow_nn(
    p0: &PointCloud,
    p1: &PointCloud,
    cfg: &FlowEstimatorConfig,
) -> Result<SceneFlow> {
    cfg.validate()?;
    let target = SpatialIndex::build(p1);
    let mut flow: Vec<Vector3<f64>> = p0
        .iter()
        .map(|p| {
            let (j, _) = target.nearest(p);
            p1.point(j) - p
        })
        .collect();

    let k = cfg.nn_smooth_neighbors.min(p0.len());
    let own = SpatialIndex::build(p0);
    let neighborhoods: Vec<Vec<usize>> = p0
        .iter()
        .map(|p| own.knn(p, k).expect("k clamped to cloud size").iter().map(|&(j, _)| j).collect())
        .collect();

    for _ in 0..cfg.nn_smooth_iterations {
        flow = neighborhoods
            .iter()
            .map(|nbrs| {
                let sum: Vector3<f64> = nbrs.iter().map(|&j| flow[j]).sum();
                sum / nbrs.len() as f64
            })
            .collect();
    }
    SceneFlow::new(flow)
}

/// Dispatches on `cfg.method`.
pub fn estimate_flow(
    p0: &PointCloud,
    p1: &PointCloud,
    cfg: &FlowEstimatorConfig,
) -> Result<SceneFlow> {
    match cfg.method {
        FlowMethod::RigidIcp => estimate_flow_rigid(p0, p1, cfg),
        FlowMethod::NnSmooth => estimate_flow_nn(p0, p1, cfg),
    }
}

/// Linear time interpolation of the bi-directional flow:
/// `F_0t = t * F_01` and `F_1t = (1 - t) * F_10`.
pub fn interpolate_flow(
    f01: &SceneFlow,
    f10: &SceneFlow,
    t: f64,
) -> Result<(SceneFlow, SceneFlow)> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "time step {t} outside the open interval (0, 1)"
        )));
    }
    Ok((f01.scaled(t), f10.scaled(1.0 - t)))
}

/// Pointwise addition of a displacement field: `p_i + flow[i]`.
pub fn warp(cloud: &PointCloud, flow: &SceneFlow) -> Result<PointCloud> {
    if cloud.len() != flow.len() {
        return Err(Error::invalid(format!(
            "flow length {} does not match cloud size {}",
            flow.len(),
            cloud.len()
        )));
    }
    PointCloud::new(
        cloud.iter().zip(flow.displacements()).map(|(p, d)| p + d).collect(),
    )
}

/// The trivial baseline: the intermediate frame is the first frame.
pub fn baseline_identity(p0: &PointCloud) -> PointCloud {
    p0.clone()
}

/// Rigid baseline: register `p0` onto `p1`, interpolate the transform to
/// `t` along the rotation geodesic, and transform `p0`.
pub fn baseline_align_icp(
    p0: &PointCloud,
    p1: &PointCloud,
    t: f64,
    cfg: &FlowEstimatorConfig,
) -> Result<PointCloud> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "time step {t} outside the open interval (0, 1)"
        )));
    }
    let (full, _) = icp_register(p0, p1, cfg)?;
    let partial = full.interpolate(t)?;
    Ok(p0.transformed(&partial))
}

/// Flow-only baseline: warp `p0` by the time-scaled forward flow, with no
/// fusion of the second frame.
pub fn baseline_flow_only(
    p0: &PointCloud,
    p1: &PointCloud,
    t: f64,
    cfg: &FlowEstimatorConfig,
) -> Result<PointCloud> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "time step {t} outside the open interval (0, 1)"
        )));
    }
    let f01 = estimate_flow(p0, p1, cfg)?;
    warp(p0, &f01.scaled(t))
}
