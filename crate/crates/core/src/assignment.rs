//! Earth Mover's Distance between equal-size clouds: the mean matched
//! distance under an optimal bijection. Small instances are solved exactly
//! by shortest augmenting paths (Jonker-Volgenant); larger ones by an
//! epsilon-scaling auction whose suboptimality bound is reported with the
//! result.

use crate::chamfer::mean_nearest_distance;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Floor for the final auction epsilon so exactly-matching clouds (mean
/// nearest-neighbor distance zero) still terminate.
const AUCTION_EPS_FLOOR: f64 = 1e-9;

/// Result of a one-to-one matching. `permutation[i]` is the index in B
/// matched to point i of A; `cost` is the mean matched distance in meters.
/// `epsilon` is `None` for exact solutions, otherwise an upper bound on the
/// mean-cost suboptimality of the auction solution.
#[derive(Debug, Clone)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub cost: f64,
    pub epsilon: Option<f64>,
}

/// Solves `min over bijections of mean |a_i - b_perm(i)|`. Instances up to
/// `exact_threshold` points use the exact solver; larger ones fall back to
/// the auction approximation.
pub fn emd(a: &PointCloud, b: &PointCloud, exact_threshold: usize) -> Result<AssignmentResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "EMD requires equal-size clouds, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let permutation;
    let epsilon;
    if n <= exact_threshold {
        permutation = solve_exact(a, b);
        epsilon = None;
    } else {
        let eps_final = (1e-3 * mean_nearest_distance(a, b)).max(AUCTION_EPS_FLOOR);
        permutation = solve_auction(a, b, eps_final);
        epsilon = Some(eps_final);
    }
    let total: f64 = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (a.point(i) - b.point(j)).norm())
        .sum();
    Ok(AssignmentResult { permutation, cost: total / n as f64, epsilon })
}

/// Exact assignment by shortest augmenting paths with potentials, O(n^3).
/// The dense cost matrix (n^2 doubles) is materialized, which is what caps
/// the exact path at moderate n.
fn solve_exact(a: &PointCloud, b: &PointCloud) -> Vec<usize> {
    let n = a.len();
    let mut cost = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = (a.point(i) - b.point(j)).norm();
        }
    }

    const FREE: usize = usize::MAX;
    let mut u = vec![0.0f64; n]; // row potentials
    let mut v = vec![0.0f64; n + 1]; // column potentials, n = virtual start column
    let mut owner = vec![FREE; n + 1]; // owner[j] = row assigned to column j

    for row in 0..n {
        owner[n] = row;
        let mut j0 = n;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut path = vec![n; n + 1];
        let mut visited = vec![false; n + 1];
        loop {
            visited[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !visited[j] {
                    let slack = cost[i0 * n + j] - u[i0] - v[j];
                    if slack < min_slack[j] {
                        min_slack[j] = slack;
                        path[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if visited[j] {
                    if owner[j] != FREE {
                        u[owner[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == FREE {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        while j0 != n {
            let j1 = path[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        }
    }

    let mut perm = vec![0usize; n];
    for j in 0..n {
        perm[owner[j]] = j;
    }
    perm
}

/// Forward auction for minimization with epsilon scaling. At termination
/// every person is within `eps` of their best object under the final
/// prices, so the total cost is within `n * eps` of optimal and the mean
/// cost within `eps`.
fn solve_auction(a: &PointCloud, b: &PointCloud, eps_final: f64) -> Vec<usize> {
    let n = a.len();
    let pa = a.points();
    let pb = b.points();
    let mut prices = vec![0.0f64; n];

    let max_cost = pa
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()])
        .chain(pb.iter().flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()]))
        .fold(0.0f64, f64::max)
        * 2.0
        * 3.0f64.sqrt();

    let mut eps = (max_cost / 4.0).max(eps_final);
    let mut assignment = vec![usize::MAX; n]; // person -> object

    loop {
        // Re-run the auction at this eps from scratch, keeping prices.
        let mut object_owner = vec![usize::MAX; n];
        assignment.fill(usize::MAX);
        let mut queue: Vec<usize> = (0..n).collect();
        while let Some(person) = queue.pop() {
            // Best and second-best value of c(person, j) + price[j].
            let mut best_j = 0;
            let mut best = f64::INFINITY;
            let mut second = f64::INFINITY;
            for j in 0..n {
                let value = (pa[person] - pb[j]).norm() + prices[j];
                if value < best {
                    second = best;
                    best = value;
                    best_j = j;
                } else if value < second {
                    second = value;
                }
            }
            let increment = if second.is_finite() { second - best } else { 0.0 };
            prices[best_j] += increment + eps;
            if object_owner[best_j] != usize::MAX {
                let displaced = object_owner[best_j];
                assignment[displaced] = usize::MAX;
                queue.push(displaced);
            }
            object_owner[best_j] = person;
            assignment[person] = best_j;
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / 4.0).max(eps_final);
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
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

    fn brute_force_min_mean(a: &PointCloud, b: &PointCloud) -> f64 {
        // Enumerates all bijections; usable to n = 8.
        let n = a.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut indices, 0, &mut |perm| {
            let total: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| (a.point(i) - b.point(j)).norm())
                .sum();
            if total < best {
                best = total;
            }
        });
        best / n as f64
    }

    fn permute(arr: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == arr.len() {
            visit(arr);
            return;
        }
        for i in k..arr.len() {
            arr.swap(k, i);
            permute(arr, k + 1, visit);
            arr.swap(k, i);
        }
    }

    #[test]
    fn identical_clouds_cost_zero() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_cloud(&mut rng, 20, 3.0);
        let r = emd(&a, &a, 512).unwrap();
        assert!(r.cost < 1e-12);
        assert!(r.epsilon.is_none());
    }

    #[test]
    fn two_point_example_prefers_identity_pairing() {
        let a = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = emd(&a, &b, 512).unwrap();
        // Identity pairing costs (0 + sqrt(2)) / 2; the swap costs 1.
        assert!((r.cost - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
        assert_eq!(r.permutation, vec![0, 1]);
    }

    #[test]
    fn exact_matches_factorial_enumeration() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..25 {
            let n = rng.gen_range(2..=8);
            let a = random_cloud(&mut rng, n, 2.0);
            let b = random_cloud(&mut rng, n, 2.0);
            let r = emd(&a, &b, 512).unwrap();
            let want = brute_force_min_mean(&a, &b);
            assert!((r.cost - want).abs() < 1e-9, "n {n}: got {} want {want}", r.cost);
            // Permutation must be a bijection.
            let mut seen = vec![false; n];
            for &j in &r.permutation {
                assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }

    #[test]
    fn exact_cost_is_symmetric() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_cloud(&mut rng, 40, 3.0);
        let b = random_cloud(&mut rng, 40, 3.0);
        let ab = emd(&a, &b, 512).unwrap().cost;
        let ba = emd(&b, &a, 512).unwrap().cost;
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn emd_dominates_one_directional_chamfer() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_cloud(&mut rng, 24, 2.0);
            let b = random_cloud(&mut rng, 24, 2.0);
            let r = emd(&a, &b, 512).unwrap();
            assert!(r.cost >= mean_nearest_distance(&a, &b) - 1e-12);
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = PointCloud::from_coords(&[[0.0; 3]]).unwrap();
        let b = PointCloud::from_coords(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(emd(&a, &b, 512), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn auction_stays_within_reported_epsilon() {
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..5 {
            let n = rng.gen_range(60..140);
            let a = random_cloud(&mut rng, n, 3.0);
            let b = random_cloud(&mut rng, n, 3.0);
            let exact = emd(&a, &b, 512).unwrap();
            let approx = emd(&a, &b, 8).unwrap(); // force the auction path
            let eps = approx.epsilon.unwrap();
            assert!(
                approx.cost <= exact.cost + eps + 1e-12,
                "trial {trial}: approx {} exact {} eps {eps}",
                approx.cost,
                exact.cost
            );
            assert!(approx.cost >= exact.cost - 1e-12);
            let mut seen = vec![false; n];
            for &j in &approx.permutation {
                assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }
}
