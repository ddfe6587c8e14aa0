//! Application-level evaluation: multi-frame ICP pose accumulation with
//! RTE/RRE errors, and the report records serialized by the CLI.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::flow::FlowEstimatorConfig;
use crate::icp::icp_register;
use crate::transform::RigidTransform;

/// Relative translation / rotation error of an estimated transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseErrorReport {
    /// `|t_est - t_gt|`, meters.
    pub rte: f64,
    /// Geodesic angle between the rotations, degrees, in [0, 180].
    pub rre_deg: f64,
    /// Number of frames the estimate was accumulated over.
    pub frame_count: usize,
}

/// Keypoint repeatability summary for one stream comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub detector: String,
    pub keypoint_count: usize,
    pub threshold: f64,
    pub repeatability: f64,
    /// True when some frame produced fewer survivors than requested or a
    /// window was truncated at the stream boundary.
    pub truncated: bool,
}

/// Registers consecutive frames pairwise and composes the transforms in
/// order, yielding the first-to-last transform.
pub fn multi_frame_icp(
    frames: &[PointCloud],
    cfg: &FlowEstimatorConfig,
) -> Result<RigidTransform> {
    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "multi-frame ICP needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let mut total = RigidTransform::identity();
    for (i, pair) in frames.windows(2).enumerate() {
        let (step, _) = icp_register(&pair[0], &pair[1], cfg).map_err(|e| match e {
            Error::DegenerateInput(msg) => {
                Error::degenerate(format!("frame pair {i}->{}: {msg}", i + 1))
            }
            other => other,
        })?;
        total = step.after(&total);
    }
    Ok(total)
}

/// RTE/RRE between an estimated and a ground-truth transform.
pub fn pose_error(
    t_est: &RigidTransform,
    t_gt: &RigidTransform,
    frame_count: usize,
) -> PoseErrorReport {
    let rte = (t_est.translation() - t_gt.translation()).norm();
    let relative = t_gt.rotation().transpose() * t_est.rotation();
    let cos = ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    PoseErrorReport { rte, rre_deg: cos.acos().to_degrees(), frame_count }
}
