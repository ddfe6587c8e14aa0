//! KITTI velodyne frame format: little-endian float32 quadruples
//! (x, y, z, intensity), 16 bytes per point.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use cloudinterp::PointCloud;
use nalgebra::Vector3;

use super::{io_err, malformed, Result};

pub const RECORD_BYTES: usize = 16;

/// A parsed frame plus the number of records rejected for non-finite
/// coordinates.
#[derive(Debug)]
pub struct KittiRead {
    pub cloud: PointCloud,
    pub rejected: usize,
}

pub fn read_kitti_bin(path: &Path) -> Result<KittiRead> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.is_empty() {
        return Err(malformed(path, "empty file (a frame holds at least one point)"));
    }
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(malformed(
            path,
            format!("size {} is not a multiple of {RECORD_BYTES}", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    let mut intensity = Vec::with_capacity(points.capacity());
    let mut rejected = 0usize;
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        let x = LittleEndian::read_f32(&rec[0..4]);
        let y = LittleEndian::read_f32(&rec[4..8]);
        let z = LittleEndian::read_f32(&rec[8..12]);
        let i = LittleEndian::read_f32(&rec[12..16]);
        if x.is_finite() && y.is_finite() && z.is_finite() {
            points.push(Vector3::new(x as f64, y as f64, z as f64));
            intensity.push(i);
        } else {
            rejected += 1;
        }
    }
    if points.is_empty() {
        return Err(malformed(path, "all records had non-finite coordinates"));
    }
    let cloud = PointCloud::with_intensity(points, intensity)?;
    Ok(KittiRead { cloud, rejected })
}

/// Writes a frame, rounding coordinates to single precision. Points without
/// an intensity channel get intensity zero.
pub fn write_kitti_bin(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    let intensities = cloud.intensity();
    for (idx, p) in cloud.iter().enumerate() {
        let mut rec = [0u8; RECORD_BYTES];
        LittleEndian::write_f32(&mut rec[0..4], p.x as f32);
        LittleEndian::write_f32(&mut rec[4..8], p.y as f32);
        LittleEndian::write_f32(&mut rec[8..12], p.z as f32);
        LittleEndian::write_f32(&mut rec[12..16], intensities.map_or(0.0, |a| a[idx]));
        buf.extend_from_slice(&rec);
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&buf).map_err(|e| io_err(path, e))?;
    Ok(())
}
