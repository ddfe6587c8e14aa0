//! SE(3) rigid transforms: validation, application, composition, and
//! geodesic interpolation.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Tolerance for the orthonormality / determinant invariants.
const ROTATION_TOL: f64 = 1e-9;

/// Rotation angles closer to pi than this are treated as axis-ambiguous.
const PI_AMBIGUITY_TOL: f64 = 1e-9;

/// A rigid transform: `p -> R * p + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates `R^T R = I` and `det R = 1` (both within 1e-9) before
    /// accepting the transform.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let identity: Matrix3<f64> = Matrix3::identity();
        for r in 0..3 {
            for c in 0..3 {
                if (gram[(r, c)] - identity[(r, c)]).abs() > ROTATION_TOL {
                    return Err(Error::invalid(format!(
                        "rotation is not orthonormal: (R^T R)[{r},{c}] = {}",
                        gram[(r, c)]
                    )));
                }
            }
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::invalid(format!("rotation determinant {det} != 1")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation has non-finite entries"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Rotation about `axis` by `angle` radians plus a translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Self { rotation: rot.into_inner(), translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self` applied after `earlier`: `x -> self(earlier(x))`.
    pub fn after(&self, earlier: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * earlier.rotation,
            translation: self.rotation * earlier.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let cos = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }

    /// Fractional transform at `s` in `[0, 1]`: the rotation follows the
    /// geodesic on SO(3) (axis fixed, angle scaled by `s`) and the
    /// translation scales linearly. `s = 0` gives the identity, `s = 1`
    /// gives the transform itself.
    ///
    /// A rotation angle of pi has no unique axis and is rejected.
    pub fn interpolate(&self, s: f64) -> Result<RigidTransform> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("interpolation fraction {s} outside [0, 1]")));
        }
        let angle = self.rotation_angle();
        if std::f64::consts::PI - angle < PI_AMBIGUITY_TOL {
            return Err(Error::degenerate(
                "rotation angle is pi: interpolation axis is ambiguous",
            ));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            self.rotation,
        ));
        let rotation = q.powf(s).to_rotation_matrix().into_inner();
        Ok(RigidTransform { rotation, translation: self.translation * s })
    }
}

impl PointCloud {
    /// Applies `T` to every point: `p -> R p + t`. Pairwise distances are
    /// preserved (within 1e-9); intensity is carried through unchanged.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        let points: Vec<_> = self.iter().map(|p| t.apply(p)).collect();
        match self.intensity() {
            Some(a) => PointCloud::with_intensity(points, a.to_vec())
                .expect("transform of a valid cloud is valid"),
            None => PointCloud::new(points).expect("transform of a valid cloud is valid"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = PointCloud::from_coords(&[[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]]).unwrap();
        let out = c.transformed(&RigidTransform::identity());
        assert_eq!(c, out);
    }

    #[test]
    fn pure_translation_on_origin() {
        let t = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let c = PointCloud::from_coords(&[[0.0, 0.0, 0.0]]).unwrap();
        let out = c.transformed(&t);
        assert_eq!(out.point(0), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn ninety_degree_z_rotation() {
        let t = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2, Vector3::zeros());
        let out = t.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(out, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn interpolate_endpoints() {
        let t = RigidTransform::from_axis_angle(
            &Vector3::z(),
            FRAC_PI_2,
            Vector3::new(2.0, 0.0, 0.0),
        );
        let s0 = t.interpolate(0.0).unwrap();
        assert_relative_eq!(s0.rotation(), &Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(s0.translation(), &Vector3::zeros(), epsilon = 1e-12);
        let s1 = t.interpolate(1.0).unwrap();
        assert_relative_eq!(s1.rotation(), t.rotation(), epsilon = 1e-12);
        assert_relative_eq!(s1.translation(), t.translation(), epsilon = 1e-12);
    }

    #[test]
    fn interpolate_halfway_is_half_angle_half_translation() {
        let t = RigidTransform::from_axis_angle(
            &Vector3::z(),
            FRAC_PI_2,
            Vector3::new(2.0, 0.0, 0.0),
        );
        let half = t.interpolate(0.5).unwrap();
        let expected =
            RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2 / 2.0, Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(half.rotation(), expected.rotation(), epsilon = 1e-12);
        assert_relative_eq!(half.translation(), expected.translation(), epsilon = 1e-12);
    }

    #[test]
    fn interpolate_rejects_pi_rotation() {
        let t = RigidTransform::from_axis_angle(&Vector3::x(), PI, Vector3::zeros());
        assert!(matches!(t.interpolate(0.5), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn geodesic_composition_reproduces_whole() {
        // Interpolating to s and composing with the remaining fraction of the
        // same geodesic reproduces T.
        let t = RigidTransform::from_axis_angle(
            &Vector3::new(1.0, 2.0, -0.5),
            0.73,
            Vector3::new(0.4, -1.1, 2.2),
        );
        for &s in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let first = t.interpolate(s).unwrap();
            // Residual rotation along the same axis; residual translation is
            // the linear remainder.
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
                *t.rotation(),
            ));
            let residual_rot = q.powf(1.0 - s).to_rotation_matrix().into_inner();
            let residual = RigidTransform::new(
                residual_rot,
                t.translation() - first.translation(),
            )
            .unwrap();
            // Rotations about a common axis commute, so the order of the
            // rotation parts does not matter; translations add directly here
            // because this decomposition is of the (R, t) pair, not a screw.
            let recomposed = RigidTransform {
                rotation: residual.rotation * first.rotation,
                translation: first.translation + residual.translation,
            };
            assert_relative_eq!(recomposed.rotation(), t.rotation(), epsilon = 1e-9);
            assert_relative_eq!(recomposed.translation(), t.translation(), epsilon = 1e-9);
        }
    }

    #[test]
    fn transform_preserves_pairwise_distances() {
        let c = PointCloud::from_coords(&[
            [0.0, 0.0, 0.0],
            [1.0, 2.0, 3.0],
            [-4.0, 0.5, 2.0],
            [10.0, -3.0, 7.0],
        ])
        .unwrap();
        let t = RigidTransform::from_axis_angle(
            &Vector3::new(0.3, -1.0, 0.2),
            1.1,
            Vector3::new(5.0, -2.0, 0.7),
        );
        let out = c.transformed(&t);
        for i in 0..c.len() {
            for j in 0..c.len() {
                let before = (c.point(i) - c.point(j)).norm();
                let after = (out.point(i) - out.point(j)).norm();
                assert!((before - after).abs() < 1e-9);
            }
        }
    }
}
