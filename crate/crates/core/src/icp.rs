//! Point-to-point ICP: alternating nearest-neighbor correspondence and
//! least-squares rigid alignment (SVD of the cross-covariance with
//! reflection correction).

use nalgebra::{Matrix3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::flow::FlowEstimatorConfig;
use crate::index::SpatialIndex;
use crate::transform::RigidTransform;

/// Relative floor on the second singular value of the cross-covariance;
/// below it the rotation is not determined (collinear/coincident points).
const RANK_TOL: f64 = 1e-12;

/// Registers `source` onto `target`, returning the transform and the final
/// correspondence RMS in meters.
///
/// Starts from centroid alignment and iterates until the RMS change drops
/// below `cfg.icp_convergence_eps` or `cfg.icp_max_iterations` is reached.
/// Each iteration drops correspondences farther than three times the current
/// median correspondence distance.
pub fn icp_register(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &FlowEstimatorConfig,
) -> Result<(RigidTransform, f64)> {
    cfg.validate()?;
    let target_index = SpatialIndex::build(target);

    // Centroid alignment as the initial guess.
    let mut current = RigidTransform::new(
        Matrix3::identity(),
        target.centroid() - source.centroid(),
    )
    .expect("identity rotation is valid");

    let mut rms = f64::INFINITY;
    let mut pairs: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(source.len());
    let mut dists: Vec<f64> = Vec::with_capacity(source.len());

    for _ in 0..cfg.icp_max_iterations {
        pairs.clear();
        dists.clear();
        for p in source.iter() {
            let moved = current.apply(p);
            let (j, d) = target_index.nearest(&moved);
            pairs.push((*p, target.point(j)));
            dists.push(d);
        }

        let threshold = 3.0 * median(&mut dists.clone());
        let kept: Vec<(Vector3<f64>, Vector3<f64>)> = pairs
            .iter()
            .zip(dists.iter())
            .filter(|&(_, &d)| d <= threshold)
            .map(|(pair, _)| *pair)
            .collect();
        let solve_pairs: &[(Vector3<f64>, Vector3<f64>)] =
            if kept.len() >= 3 { &kept } else { &pairs };

        let next = kabsch(solve_pairs)?;
        let next_rms = {
            let sq: f64 = solve_pairs
                .iter()
                .map(|(s, q)| (next.apply(s) - q).norm_squared())
                .sum();
            (sq / solve_pairs.len() as f64).sqrt()
        };
        current = next;
        let change = (rms - next_rms).abs();
        rms = next_rms;
        if change < cfg.icp_convergence_eps {
            break;
        }
    }

    Ok((current, rms))
}

fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    values[mid]
}

/// Least-squares rigid transform mapping the first element of each pair
/// onto the second.
fn kabsch(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::degenerate(format!(
            "rigid alignment needs at least 3 correspondences, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let cs: Vector3<f64> = pairs.iter().map(|(s, _)| s).sum::<Vector3<f64>>() / n;
    let ct: Vector3<f64> = pairs.iter().map(|(_, q)| q).sum::<Vector3<f64>>() / n;

    let mut cross = Matrix3::<f64>::zeros();
    for (s, q) in pairs {
        cross += (s - cs) * (q - ct).transpose();
    }

    let svd = cross.svd(true, true);
    let sigma = svd.singular_values;
    if sigma[0] <= 0.0 || sigma[1] <= RANK_TOL * sigma[0] {
        return Err(Error::degenerate(
            "cross-covariance is rank deficient (collinear or coincident points)",
        ));
    }
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let d = (vt.transpose() * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = vt.transpose() * correction * u.transpose();
    let translation = ct - rotation * cs;
    RigidTransform::new(rotation, translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_cloud(rng: &mut StdRng, n: usize, scale: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-scale..scale),
                        rng.gen_range(-scale..scale),
                        rng.gen_range(-scale..scale),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_clouds_register_to_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let c = random_cloud(&mut rng, 200, 5.0);
        let (t, rms) = icp_register(&c, &c, &FlowEstimatorConfig::default()).unwrap();
        assert!(rms < 1e-9);
        assert!(t.rotation_angle() < 1e-9);
        assert!(t.translation().norm() < 1e-9);
    }

    #[test]
    fn recovers_small_rigid_motion() {
        let mut rng = StdRng::seed_from_u64(11);
        let source = random_cloud(&mut rng, 2048, 5.0);
        let truth = RigidTransform::from_axis_angle(
            &Vector3::z(),
            5.0_f64.to_radians(),
            Vector3::new(0.3, 0.0, 0.0),
        );
        let target = source.transformed(&truth);
        let (t, _) = icp_register(&source, &target, &FlowEstimatorConfig::default()).unwrap();
        let rot_err = (t.after(&truth.inverse())).rotation_angle();
        let trans_err = (t.translation() - truth.translation()).norm();
        assert!(rot_err < 1e-6, "rotation error {rot_err}");
        assert!(trans_err < 1e-6, "translation error {trans_err}");
    }

    #[test]
    fn single_point_source_is_degenerate() {
        let s = PointCloud::from_coords(&[[0.0, 0.0, 0.0]]).unwrap();
        let t = PointCloud::from_coords(&[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 1.0, 0.0]])
            .unwrap();
        assert!(matches!(
            icp_register(&s, &t, &FlowEstimatorConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn collinear_source_is_degenerate() {
        let s = PointCloud::new((0..32).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect())
            .unwrap();
        let t = s.clone();
        assert!(matches!(
            icp_register(&s, &t, &FlowEstimatorConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }
}
