//! Stream manifests: an ordered list of frame files with timestamps, the
//! stream rate, and optional per-frame ground-truth poses (sensor-to-world),
//! stored as JSON next to the frames. Also the rate-downsampling split that
//! turns a stream into a low-rate input plus held-out intermediate frames.

use std::fs;
use std::path::{Path, PathBuf};

use cloudinterp::{PointCloud, RigidTransform};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{io_err, malformed, IoError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseJson {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl PoseJson {
    pub fn to_transform(&self) -> Result<RigidTransform> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        RigidTransform::new(r, Vector3::from(self.translation)).map_err(IoError::from)
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        let r = t.rotation();
        Self {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameEntry {
    pub path: String,
    /// Seconds.
    pub timestamp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub rate_hz: f64,
    pub frames: Vec<FrameEntry>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(IoError::Invalid("manifest lists no frames".into()));
        }
        if !(self.rate_hz > 0.0) {
            return Err(IoError::Invalid("rate_hz must be > 0".into()));
        }
        for pair in self.frames.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(IoError::Invalid(format!(
                    "timestamps must be strictly increasing ({} then {})",
                    pair[0].timestamp, pair[1].timestamp
                )));
            }
        }
        let with_pose = self.frames.iter().filter(|f| f.pose.is_some()).count();
        if with_pose != 0 && with_pose != self.frames.len() {
            return Err(IoError::Invalid(
                "poses must be present on every frame or on none".into(),
            ));
        }
        Ok(())
    }

    pub fn has_poses(&self) -> bool {
        self.frames.first().map_or(false, |f| f.pose.is_some())
    }
}

/// A manifest bound to the directory it was loaded from, so relative frame
/// paths resolve.
#[derive(Debug, Clone)]
pub struct FrameStream {
    pub manifest: Manifest,
    pub base_dir: PathBuf,
}

impl FrameStream {
    pub fn load(manifest_path: &Path) -> Result<FrameStream> {
        let text = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| malformed(manifest_path, e.to_string()))?;
        manifest.validate()?;
        let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(FrameStream { manifest, base_dir })
    }

    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        self.manifest.validate()?;
        let text = serde_json::to_string_pretty(&self.manifest)
            .expect("manifest serialization cannot fail");
        fs::write(manifest_path, text).map_err(|e| io_err(manifest_path, e))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.base_dir.join(&self.manifest.frames[index].path)
    }

    pub fn load_frame(&self, index: usize) -> Result<PointCloud> {
        super::load_frame(&self.frame_path(index))
    }

    pub fn pose(&self, index: usize) -> Result<Option<RigidTransform>> {
        self.manifest.frames[index].pose.as_ref().map(|p| p.to_transform()).transpose()
    }
}

/// One gap of a downsampled stream: the held-out frames between kept frame
/// `kept_index` and `kept_index + 1` (of the low-rate stream), with their
/// fractional time steps. The trailing group of a stream whose length is
/// not a multiple of the factor has no closing kept frame and is marked
/// incomplete.
#[derive(Debug, Clone)]
pub struct HeldOutGroup {
    pub kept_index: usize,
    pub frames: Vec<HeldOutFrame>,
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct HeldOutFrame {
    /// Index into the original stream.
    pub original_index: usize,
    /// Fractional position k/factor inside the gap.
    pub t: f64,
}

/// Keeps every `factor`-th frame and groups the skipped frames as ground
/// truth for evaluation. Kept and held-out frames partition the original
/// stream exactly.
pub fn downsample_stream(
    stream: &FrameStream,
    factor: usize,
) -> Result<(FrameStream, Vec<HeldOutGroup>)> {
    if factor < 2 {
        return Err(IoError::Invalid(format!("downsample factor must be >= 2, got {factor}")));
    }
    let n = stream.len();
    if n <= factor {
        return Err(IoError::Invalid(format!(
            "stream of {n} frames is too short for factor {factor}"
        )));
    }
    let mut low = Manifest { rate_hz: stream.manifest.rate_hz / factor as f64, frames: Vec::new() };
    let mut groups: Vec<HeldOutGroup> = Vec::new();
    for (i, frame) in stream.manifest.frames.iter().enumerate() {
        if i % factor == 0 {
            low.frames.push(frame.clone());
        } else {
            let kept_index = i / factor;
            let t = (i % factor) as f64 / factor as f64;
            if groups.last().map_or(true, |g| g.kept_index != kept_index) {
                groups.push(HeldOutGroup { kept_index, frames: Vec::new(), complete: false });
            }
            groups
                .last_mut()
                .unwrap()
                .frames
                .push(HeldOutFrame { original_index: i, t });
        }
    }
    // A group is complete when the next kept frame exists.
    let kept_count = low.frames.len();
    for g in &mut groups {
        g.complete = g.kept_index + 1 < kept_count;
    }
    Ok((FrameStream { manifest: low, base_dir: stream.base_dir.clone() }, groups))
}
