//! Minimal PLY export/import: vertex elements with float x, y, z and an
//! optional float intensity, in ascii or binary-little-endian form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use cloudinterp::PointCloud;
use nalgebra::Vector3;

use super::{io_err, malformed, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyMode {
    Ascii,
    BinaryLittleEndian,
}

pub fn write_ply(cloud: &PointCloud, path: &Path, mode: PlyMode) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let has_intensity = cloud.intensity().is_some();
    let format = match mode {
        PlyMode::Ascii => "ascii",
        PlyMode::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(&format!("format {format} 1.0\n"));
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if has_intensity {
        header.push_str("property float intensity\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;

    match mode {
        PlyMode::Ascii => {
            for (i, p) in cloud.iter().enumerate() {
                let mut line = format!("{} {} {}", p.x as f32, p.y as f32, p.z as f32);
                if let Some(a) = cloud.intensity() {
                    line.push_str(&format!(" {}", a[i]));
                }
                line.push('\n');
                w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
        PlyMode::BinaryLittleEndian => {
            let stride = if has_intensity { 16 } else { 12 };
            let mut rec = vec![0u8; stride];
            for (i, p) in cloud.iter().enumerate() {
                LittleEndian::write_f32(&mut rec[0..4], p.x as f32);
                LittleEndian::write_f32(&mut rec[4..8], p.y as f32);
                LittleEndian::write_f32(&mut rec[8..12], p.z as f32);
                if let Some(a) = cloud.intensity() {
                    LittleEndian::write_f32(&mut rec[12..16], a[i]);
                }
                w.write_all(&rec).map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads the subset of PLY this crate writes (float x/y/z + optional float
/// intensity, ascii or binary-little-endian).
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let header_end = find_header_end(&bytes)
        .ok_or_else(|| malformed(path, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| malformed(path, "non-utf8 header"))?;

    let mut format = None;
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    let mut in_vertex_element = false;
    for line in header.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["format", f, _] => format = Some(f.to_string()),
            ["element", "vertex", n] => {
                in_vertex_element = true;
                vertex_count =
                    Some(n.parse().map_err(|_| malformed(path, "bad vertex count"))?);
            }
            ["element", ..] => in_vertex_element = false,
            ["property", ty, name] if in_vertex_element => {
                if *ty != "float" {
                    return Err(malformed(path, format!("unsupported property type {ty}")));
                }
                properties.push(name.to_string());
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| malformed(path, "missing format line"))?;
    let count = vertex_count.ok_or_else(|| malformed(path, "missing vertex element"))?;
    let idx_of = |name: &str| properties.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx_of("x"), idx_of("y"), idx_of("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(malformed(path, "vertex element lacks x/y/z")),
    };
    let ii = idx_of("intensity");

    let body = &bytes[header_end..];
    let mut points = Vec::with_capacity(count);
    let mut intensity = ii.map(|_| Vec::with_capacity(count));
    match format.as_str() {
        "ascii" => {
            let text =
                std::str::from_utf8(body).map_err(|_| malformed(path, "non-utf8 body"))?;
            for line in text.lines().take(count) {
                let vals: Vec<f32> = line
                    .split_whitespace()
                    .map(|v| v.parse::<f32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| malformed(path, "bad ascii vertex"))?;
                if vals.len() != properties.len() {
                    return Err(malformed(path, "vertex arity mismatch"));
                }
                points.push(Vector3::new(vals[ix] as f64, vals[iy] as f64, vals[iz] as f64));
                if let (Some(list), Some(i)) = (&mut intensity, ii) {
                    list.push(vals[i]);
                }
            }
        }
        "binary_little_endian" => {
            let stride = properties.len() * 4;
            if body.len() < stride * count {
                return Err(malformed(path, "binary body shorter than vertex count"));
            }
            for rec in body.chunks_exact(stride).take(count) {
                let val = |i: usize| LittleEndian::read_f32(&rec[i * 4..i * 4 + 4]);
                points.push(Vector3::new(val(ix) as f64, val(iy) as f64, val(iz) as f64));
                if let (Some(list), Some(i)) = (&mut intensity, ii) {
                    list.push(val(i));
                }
            }
        }
        other => return Err(malformed(path, format!("unsupported format {other}"))),
    }
    if points.len() != count {
        return Err(malformed(path, "fewer vertices than declared"));
    }
    let cloud = match intensity {
        Some(list) => PointCloud::with_intensity(points, list)?,
        None => PointCloud::new(points)?,
    };
    Ok(cloud)
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let needle = b"end_header\n";
    bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + needle.len())
}
