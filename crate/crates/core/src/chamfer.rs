//! Chamfer distance (sum of mean nearest-neighbor distances in both
//! directions, unsquared norms) and its subgradient with respect to the
//! first cloud, used both as the training loss and as an evaluation metric.

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::index::SpatialIndex;

/// `CD(A, B) = mean_a min_b |a - b| + mean_b min_a |a - b|`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    let (loss, _, _) = nearest_terms(a, b);
    loss
}

/// Gradient of the Chamfer distance with respect to the points of `a`,
/// holding the nearest-neighbor assignments fixed. Both terms contribute:
/// the A-to-B term through each a's own nearest neighbor, the B-to-A term
/// through the points of `b` whose nearest neighbor lands on a given a.
/// Coincident pairs contribute zero.
pub fn chamfer_grad(a: &PointCloud, b: &PointCloud) -> Vec<Vector3<f64>> {
    let (_, grads, _) = nearest_terms(a, b);
    grads
}

/// Loss and gradient in one pass (the nearest-neighbor searches dominate).
pub fn chamfer_loss_and_grad(a: &PointCloud, b: &PointCloud) -> (f64, Vec<Vector3<f64>>) {
    let (loss, grads, _) = nearest_terms(a, b);
    (loss, grads)
}

/// Mean nearest-neighbor distance from every point of `a` into `b`; the
/// one-directional half of the Chamfer distance.
pub fn mean_nearest_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    let index = SpatialIndex::build(b);
    let sum: f64 = a.iter().map(|p| index.nearest(p).1).sum();
    sum / a.len() as f64
}

fn nearest_terms(a: &PointCloud, b: &PointCloud) -> (f64, Vec<Vector3<f64>>, Vec<usize>) {
    let index_b = SpatialIndex::build(b);
    let index_a = SpatialIndex::build(a);
    let na = a.len() as f64;
    let nb = b.len() as f64;

    let mut grads = vec![Vector3::zeros(); a.len()];
    let mut nearest_in_b = Vec::with_capacity(a.len());

    // A -> B term.
    let mut sum_ab = 0.0;
    for (i, p) in a.iter().enumerate() {
        let (j, d) = index_b.nearest(p);
        nearest_in_b.push(j);
        sum_ab += d;
        if d > 0.0 {
            grads[i] += (p - b.point(j)) / (d * na);
        }
    }

    // B -> A term; routes gradient onto the matched point of A.
    let mut sum_ba = 0.0;
    for q in b.iter() {
        let (i, d) = index_a.nearest(q);
        sum_ba += d;
        if d > 0.0 {
            grads[i] += (a.point(i) - q) / (d * nb);
        }
    }

    (sum_ab / na + sum_ba / nb, grads, nearest_in_b)
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

    fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
        let one_way = |x: &PointCloud, y: &PointCloud| -> f64 {
            x.iter()
                .map(|p| {
                    y.iter()
                        .map(|q| (p - q).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / x.len() as f64
        };
        one_way(a, b) + one_way(b, a)
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_cloud(&mut rng, 50, 2.0);
        assert_eq!(chamfer_distance(&a, &a), 0.0);
    }

    #[test]
    fn single_point_pair() {
        let a = PointCloud::from_coords(&[[0.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_coords(&[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(chamfer_distance(&a, &b), 2.0);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_cloud(&mut rng, 64, 3.0);
            let b = random_cloud(&mut rng, 64, 3.0);
            let got = chamfer_distance(&a, &b);
            let want = brute_chamfer(&a, &b);
            assert!((got - want).abs() < 1e-12, "got {got} want {want}");
        }
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_cloud(&mut rng, 40, 2.0);
        let b = random_cloud(&mut rng, 70, 2.0);
        let ab = chamfer_distance(&a, &b);
        let ba = chamfer_distance(&b, &a);
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_reordering() {
        let mut rng = StdRng::seed_from_u64(4);
        let a = random_cloud(&mut rng, 30, 2.0);
        let b = random_cloud(&mut rng, 30, 2.0);
        let shuffled = a.random_sample(a.len(), 77).unwrap();
        assert!((chamfer_distance(&a, &b) - chamfer_distance(&shuffled, &b)).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_for_identical_clouds() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_cloud(&mut rng, 25, 2.0);
        for g in chamfer_grad(&a, &a) {
            assert_eq!(g, Vector3::zeros());
        }
    }

    #[test]
    fn single_point_gradient_is_doubled_unit() {
        // Both Chamfer terms pull the lone point of A toward B.
        let a = PointCloud::from_coords(&[[1.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_coords(&[[0.0, 0.0, 0.0]]).unwrap();
        let g = chamfer_grad(&a, &b);
        assert!((g[0] - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..5 {
            let a = random_cloud(&mut rng, 32, 2.0);
            let b = random_cloud(&mut rng, 32, 2.0);
            let grads = chamfer_grad(&a, &b);
            let h = 1e-6;
            for i in 0..a.len() {
                for axis in 0..3 {
                    let mut plus = a.points().to_vec();
                    let mut minus = a.points().to_vec();
                    plus[i][axis] += h;
                    minus[i][axis] -= h;
                    let lp = chamfer_distance(&PointCloud::new(plus).unwrap(), &b);
                    let lm = chamfer_distance(&PointCloud::new(minus).unwrap(), &b);
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic = grads[i][axis];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                    assert!(
                        (numeric - analytic).abs() / denom < 1e-4,
                        "point {i} axis {axis}: numeric {numeric} analytic {analytic}"
                    );
                }
            }
        }
    }
}
