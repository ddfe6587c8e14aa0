//! ISS (Intrinsic Shape Signatures) keypoint detection and the keypoint
//! repeatability measure.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::transform::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IssParams {
    /// Radius of the covariance support neighborhood, meters.
    pub support_radius: f64,
    /// Non-maximum-suppression radius, meters.
    pub nms_radius: f64,
    /// Upper bound on lambda2 / lambda1.
    pub gamma21: f64,
    /// Upper bound on lambda3 / lambda2.
    pub gamma32: f64,
    /// Saliency floor on lambda3; planar neighborhoods fall below it.
    pub lambda3_floor: f64,
    /// Minimum neighbors (the point itself included) for a usable
    /// covariance.
    pub min_neighbors: usize,
    /// Number of keypoints kept after ranking by lambda3.
    pub keypoint_count: usize,
}

impl Default for IssParams {
    fn default() -> Self {
        Self {
            support_radius: 1.0,
            nms_radius: 1.5,
            gamma21: 0.975,
            gamma32: 0.975,
            lambda3_floor: 1e-6,
            min_neighbors: 5,
            keypoint_count: 256,
        }
    }
}

impl IssParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.support_radius > 0.0 && self.nms_radius > 0.0) {
            return Err(Error::invalid("ISS radii must be > 0"));
        }
        if !(self.gamma21 > 0.0 && self.gamma32 > 0.0) {
            return Err(Error::invalid("ISS eigenvalue ratios must be > 0"));
        }
        if self.keypoint_count == 0 {
            return Err(Error::invalid("keypoint_count must be >= 1"));
        }
        Ok(())
    }
}

/// Detected keypoints: indices into the source cloud ordered by descending
/// saliency (lambda3). `truncated` flags runs where fewer survivors existed
/// than `keypoint_count` requested.
#[derive(Debug, Clone)]
pub struct KeypointSet {
    pub indices: Vec<usize>,
    pub saliency: Vec<f64>,
    pub truncated: bool,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Materializes the keypoints as a cloud; `None` when nothing survived.
    pub fn to_cloud(&self, source: &PointCloud) -> Option<PointCloud> {
        if self.indices.is_empty() {
            return None;
        }
        Some(
            PointCloud::new(self.indices.iter().map(|&i| source.point(i)).collect())
                .expect("keypoints of a valid cloud are valid"),
        )
    }
}

/// ISS detection: per-point covariance eigenvalues over the support radius,
/// the two eigenvalue-ratio tests, non-maximum suppression on lambda3, and
/// a final top-`keypoint_count` cut.
pub fn detect_iss_keypoints(cloud: &PointCloud, params: &IssParams) -> Result<KeypointSet> {
    params.validate()?;
    let index = SpatialIndex::build(cloud);

    // Saliency pass.
    let mut survivors: Vec<(usize, f64)> = Vec::new();
    for (i, p) in cloud.iter().enumerate() {
        let nbrs = index.within_radius(p, params.support_radius);
        if nbrs.len() < params.min_neighbors {
            continue;
        }
        let eig = covariance_eigenvalues(cloud, &nbrs);
        let (l1, l2, l3) = (eig[0], eig[1], eig[2]);
        if l1 <= 0.0 || l2 <= 0.0 {
            continue;
        }
        if l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32 && l3 > params.lambda3_floor {
            survivors.push((i, l3));
        }
    }

    // Non-maximum suppression on lambda3 within the NMS radius; equal
    // saliency resolves to the lower point index.
    let kept: Vec<(usize, f64)> = if survivors.is_empty() {
        Vec::new()
    } else {
        let surv_cloud =
            PointCloud::new(survivors.iter().map(|&(i, _)| cloud.point(i)).collect())
                .expect("survivors are valid points");
        let surv_index = SpatialIndex::build(&surv_cloud);
        survivors
            .iter()
            .enumerate()
            .filter(|&(si, &(i, l3))| {
                surv_index
                    .within_radius(&cloud.point(i), params.nms_radius)
                    .iter()
                    .all(|&(sj, _)| {
                        let (j, other) = survivors[sj];
                        sj == si || l3 > other || (l3 == other && i < j)
                    })
            })
            .map(|(_, &s)| s)
            .collect()
    };

    let mut ranked = kept;
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let truncated = ranked.len() < params.keypoint_count;
    ranked.truncate(params.keypoint_count);

    Ok(KeypointSet {
        indices: ranked.iter().map(|&(i, _)| i).collect(),
        saliency: ranked.iter().map(|&(_, l3)| l3).collect(),
        truncated,
    })
}

/// Eigenvalues (descending) of the covariance of the neighborhood about its
/// centroid.
fn covariance_eigenvalues(cloud: &PointCloud, nbrs: &[(usize, f64)]) -> [f64; 3] {
    let n = nbrs.len() as f64;
    let centroid: Vector3<f64> =
        nbrs.iter().map(|&(j, _)| cloud.point(j)).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::<f64>::zeros();
    for &(j, _) in nbrs {
        let d = cloud.point(j) - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    [eig[0], eig[1], eig[2]]
}

/// Fraction of `kp_a` whose nearest neighbor in the pose-aligned `kp_b` is
/// within `delta_r`. `t_gt` maps frame-B coordinates into frame A.
pub fn repeatability(
    kp_a: &PointCloud,
    kp_b: &PointCloud,
    t_gt: &RigidTransform,
    delta_r: f64,
) -> f64 {
    let aligned = kp_b.transformed(t_gt);
    let index = SpatialIndex::build(&aligned);
    let hits = kp_a.iter().filter(|p| index.nearest(p).1 <= delta_r).count();
    hits as f64 / kp_a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Dense axis-aligned cube surface with edges and corners.
    fn cube_cloud(per_edge: usize, half: f64) -> PointCloud {
        let step = 2.0 * half / (per_edge - 1) as f64;
        let mut pts = Vec::new();
        for i in 0..per_edge {
            for j in 0..per_edge {
                let a = -half + i as f64 * step;
                let b = -half + j as f64 * step;
                for &s in &[-half, half] {
                    pts.push(Vector3::new(a, b, s));
                    pts.push(Vector3::new(a, s, b));
                    pts.push(Vector3::new(s, a, b));
                }
            }
        }
        pts.sort_by(|p, q| {
            p.x.partial_cmp(&q.x)
                .unwrap()
                .then(p.y.partial_cmp(&q.y).unwrap())
                .then(p.z.partial_cmp(&q.z).unwrap())
        });
        pts.dedup_by(|p, q| (*p - *q).norm() < 1e-12);
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn uniform_plane_has_no_keypoints() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Vector3::new(i as f64 * 0.2, j as f64 * 0.2, 0.0));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let kp = detect_iss_keypoints(&cloud, &IssParams::default()).unwrap();
        assert!(kp.is_empty());
        assert!(kp.truncated);
    }

    #[test]
    fn cube_corners_rank_highest() {
        let cloud = cube_cloud(21, 1.0);
        let params = IssParams {
            support_radius: 0.45,
            nms_radius: 0.3,
            keypoint_count: 8,
            ..Default::default()
        };
        let kp = detect_iss_keypoints(&cloud, &params).unwrap();
        assert_eq!(kp.len(), 8);
        // All eight reported keypoints sit at (or adjacent to) cube corners.
        for &i in &kp.indices {
            let p = cloud.point(i);
            assert!(
                p.x.abs() > 0.85 && p.y.abs() > 0.85 && p.z.abs() > 0.85,
                "keypoint {p:?} not at a corner"
            );
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let cloud = cube_cloud(15, 1.0);
        let params = IssParams { support_radius: 0.5, keypoint_count: 16, ..Default::default() };
        let a = detect_iss_keypoints(&cloud, &params).unwrap();
        let b = detect_iss_keypoints(&cloud, &params).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn repeatability_of_transformed_copy_is_one() {
        let mut rng = StdRng::seed_from_u64(5);
        let kp_a = PointCloud::new(
            (0..40)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let t = RigidTransform::from_axis_angle(
            &Vector3::z(),
            0.4,
            Vector3::new(1.0, -2.0, 0.5),
        );
        // B lives in its own frame: B = T^-1(A), so T maps B back onto A.
        let kp_b = kp_a.transformed(&t.inverse());
        assert_eq!(repeatability(&kp_a, &kp_b, &t, 0.5), 1.0);
    }

    #[test]
    fn repeatability_zero_when_everything_is_far() {
        let kp_a = PointCloud::from_coords(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let kp_b = PointCloud::from_coords(&[[100.0, 0.0, 0.0], [101.0, 0.0, 0.0]]).unwrap();
        assert_eq!(repeatability(&kp_a, &kp_b, &RigidTransform::identity(), 0.5), 0.0);
    }

    #[test]
    fn repeatability_half_by_construction() {
        let kp_a = PointCloud::from_coords(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [50.0, 0.0, 0.0],
            [60.0, 0.0, 0.0],
        ])
        .unwrap();
        let kp_b = PointCloud::from_coords(&[[0.1, 0.0, 0.0], [1.1, 0.0, 0.0]]).unwrap();
        assert_eq!(repeatability(&kp_a, &kp_b, &RigidTransform::identity(), 0.5), 0.5);
    }

    #[test]
    fn repeatability_invariant_under_common_rigid_motion() {
        let mut rng = StdRng::seed_from_u64(9);
        let kp_a = PointCloud::new(
            (0..30)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let kp_b = PointCloud::new(
            (0..30)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let t_gt = RigidTransform::from_axis_angle(&Vector3::x(), 0.3, Vector3::new(0.5, 0.0, 0.0));
        let g = RigidTransform::from_axis_angle(
            &Vector3::new(1.0, 1.0, 0.0),
            0.8,
            Vector3::new(-2.0, 1.0, 3.0),
        );
        let base = repeatability(&kp_a, &kp_b, &t_gt, 0.5);
        let moved = repeatability(
            &kp_a.transformed(&g),
            &kp_b.transformed(&g),
            &g.after(&t_gt).after(&g.inverse()),
            0.5,
        );
        assert!((base - moved).abs() < 1e-12);
    }
}
