//! Exact k-nearest-neighbor and radius queries over an immutable kd-tree.
//!
//! Queries return exactly the points a brute-force scan would, with ties in
//! distance broken by lower point index so every downstream consumer is
//! deterministic.

use std::collections::BinaryHeap;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Immutable kd-tree over a point cloud.
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    /// Point indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
    root: u32,
}

enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Neighbor candidate ordered by (squared distance, index); the heap keeps
/// the current worst candidate on top.
#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Coordinates are finite by the cloud invariant, so d2 is never NaN.
        self.d2
            .partial_cmp(&other.d2)
            .unwrap()
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn d2(a: &[f64; 3], q: &Vector3<f64>) -> f64 {
    let dx = a[0] - q.x;
    let dy = a[1] - q.y;
    let dz = a[2] - q.z;
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let coords: Vec<[f64; 3]> = cloud.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..coords.len() as u32).collect();
        let mut nodes = Vec::new();
        let n = coords.len();
        let root = build_node(&coords, &mut order, 0, n, &mut nodes);
        Self { coords, nodes, order, root }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// The `k` nearest neighbors of `query`, ascending by distance with ties
    /// broken by lower point index. Distances are exact Euclidean norms.
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::invalid("knn requires k >= 1"));
        }
        if k > self.len() {
            return Err(Error::invalid(format!(
                "knn requires k <= cloud size ({k} > {})",
                self.len()
            )));
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_visit(self.root, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        Ok(out.into_iter().map(|c| (c.idx as usize, c.d2.sqrt())).collect())
    }

    /// Nearest single neighbor: `(point index, distance)`.
    pub fn nearest(&self, query: &Vector3<f64>) -> (usize, f64) {
        self.knn(query, 1).expect("index is non-empty")[0]
    }

    /// All points within `radius` (inclusive) of `query`, ascending by
    /// (distance, index).
    pub fn within_radius(&self, query: &Vector3<f64>, radius: f64) -> Vec<(usize, f64)> {
        let r2 = radius * radius;
        let mut hits = Vec::new();
        self.radius_visit(self.root, query, r2, &mut hits);
        hits.sort_unstable();
        hits.into_iter().map(|c| (c.idx as usize, c.d2.sqrt())).collect()
    }

    fn knn_visit(&self, node: u32, q: &Vector3<f64>, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start as usize..*end as usize] {
                    let cand = Candidate { d2: d2(&self.coords[idx as usize], q), idx };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.knn_visit(near, q, k, heap);
                // The far side can still hold a point at exactly the current
                // worst distance but with a lower index, so prune only on
                // strict excess.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.knn_visit(far, q, k, heap);
                }
            }
        }
    }

    fn radius_visit(&self, node: u32, q: &Vector3<f64>, r2: f64, hits: &mut Vec<Candidate>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start as usize..*end as usize] {
                    let d2 = d2(&self.coords[idx as usize], q);
                    if d2 <= r2 {
                        hits.push(Candidate { d2, idx });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.radius_visit(near, q, r2, hits);
                if diff * diff <= r2 {
                    self.radius_visit(far, q, r2, hits);
                }
            }
        }
    }
}

fn build_node(
    coords: &[[f64; 3]],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
        return (nodes.len() - 1) as u32;
    }
    // Split the widest axis at the median.
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &idx in slice.iter() {
        let c = &coords[idx as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap()).unwrap();
    let mid = len / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a as usize][axis]
            .partial_cmp(&coords[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let value = coords[slice[mid] as usize][axis];
    let placeholder = nodes.len();
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(coords, order, start, start + mid, nodes);
    let right = build_node(coords, order, start + mid, end, nodes);
    nodes[placeholder] = Node::Split { axis: axis as u8, value, left, right };
    placeholder as u32
}

/// Convenience constructor mirroring the index's role as a per-cloud cache.
pub fn build_index(cloud: &PointCloud) -> SpatialIndex {
    SpatialIndex::build(cloud)
}
