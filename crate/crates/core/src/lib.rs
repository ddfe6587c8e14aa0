//! Point cloud frame interpolation between consecutive LiDAR frames.
//!
//! Given two frames `P0` and `P1` and a time step `t` in `(0, 1)`, the
//! pipeline estimates bi-directional per-point motion, warps both frames to
//! `t`, and fuses the warped clouds into one intermediate frame via
//! attention-weighted neighbor sums. The crate also carries the training
//! loop for the fusion network, the evaluation metrics (Chamfer distance,
//! Earth Mover's Distance, keypoint repeatability, multi-frame ICP pose
//! error), and a synthetic-scene generator with exact ground truth.

pub mod assignment;
pub mod chamfer;
pub mod cloud;
pub mod error;
pub mod eval;
pub mod flow;
pub mod fusion;
pub mod icp;
pub mod index;
pub mod keypoints;
pub mod model;
pub mod sample;
pub mod synth;
pub mod train;
pub mod transform;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use flow::{FlowEstimatorConfig, FlowMethod, SceneFlow};
pub use fusion::{FusionConfig, TimeStep};
pub use index::SpatialIndex;
pub use model::FusionModel;
pub use transform::RigidTransform;
