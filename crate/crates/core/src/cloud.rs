//! Point cloud container.
//!
//! A [`PointCloud`] is an ordered, non-empty list of finite 3D points in
//! meters, with an optional per-point intensity attribute carried through
//! ingestion. The pipeline itself only consumes xyz.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Ordered list of 3D points. Immutable after construction; every
/// coordinate is guaranteed finite and the cloud is guaranteed non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    intensity: Option<Vec<f32>>,
}

impl PointCloud {
    /// Builds a cloud from points, validating the invariants (non-empty,
    /// all coordinates finite).
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite coordinates ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(Self { points, intensity: None })
    }

    /// Like [`PointCloud::new`] but attaches a per-point intensity channel.
    pub fn with_intensity(points: Vec<Vector3<f64>>, intensity: Vec<f32>) -> Result<Self> {
        if intensity.len() != points.len() {
            return Err(Error::invalid(format!(
                "intensity length {} does not match point count {}",
                intensity.len(),
                points.len()
            )));
        }
        let mut cloud = Self::new(points)?;
        cloud.intensity = Some(intensity);
        Ok(cloud)
    }

    pub fn from_coords(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Vector3::new(c[0], c[1], c[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vector3<f64> {
        self.points[i]
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector3<f64>> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.points.iter().sum();
        sum / self.points.len() as f64
    }

    /// Selects the points at `indices`, carrying intensity along when present.
    pub fn select(&self, indices: &[u32]) -> Result<Self> {
        let points: Vec<_> = indices.iter().map(|&i| self.points[i as usize]).collect();
        let intensity = self
            .intensity
            .as_ref()
            .map(|a| indices.iter().map(|&i| a[i as usize]).collect());
        if points.is_empty() {
            return Err(Error::invalid("selection is empty"));
        }
        Ok(Self { points, intensity })
    }

    /// Concatenates two clouds. Intensity is kept only if both sides carry it.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let intensity = match (&self.intensity, &other.intensity) {
            (Some(a), Some(b)) => {
                let mut v = a.clone();
                v.extend_from_slice(b);
                Some(v)
            }
            _ => None,
        };
        PointCloud { points, intensity }
    }
}
