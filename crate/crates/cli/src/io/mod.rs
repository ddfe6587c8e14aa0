//! Persistence: KITTI-style .bin frames, PLY export, model checkpoints,
//! and stream manifests.

pub mod checkpoint;
pub mod kitti;
pub mod manifest;
pub mod ply;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    Malformed { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] cloudinterp::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.display().to_string(), source }
}

pub(crate) fn malformed(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.display().to_string(), reason: reason.into() }
}

/// Loads a frame by extension: `.bin` (KITTI float32 quadruples) or `.ply`.
/// Records with non-finite coordinates are dropped with a warning.
pub fn load_frame(path: &Path) -> Result<cloudinterp::PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let read = kitti::read_kitti_bin(path)?;
            if read.rejected > 0 {
                eprintln!(
                    "warning: {}: dropped {} record(s) with non-finite coordinates",
                    path.display(),
                    read.rejected
                );
            }
            Ok(read.cloud)
        }
        Some("ply") => ply::read_ply(path),
        other => Err(IoError::Invalid(format!(
            "unsupported frame extension {other:?} for {}",
            path.display()
        ))),
    }
}
