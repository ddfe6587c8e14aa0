//! Seeded random sampling without replacement, plus the seed-derivation
//! scheme that keeps per-frame and per-step work deterministic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// splitmix64 finalizer; stable across platforms and releases.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for a numbered sub-stream (frame index,
/// training step, sampling pass). Used everywhere a global seed fans out to
/// parallelizable work so results never depend on scheduling.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `m` distinct indices drawn uniformly without replacement from `0..n`
/// (partial Fisher-Yates). `m == 0` is allowed here; the public cloud-level
/// operation enforces positivity.
pub(crate) fn sample_indices(n: usize, m: usize, seed: u64) -> Vec<u32> {
    debug_assert!(m <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx
}

impl PointCloud {
    /// `m` distinct points drawn uniformly without replacement,
    /// deterministic for a fixed seed.
    pub fn random_sample(&self, m: usize, seed: u64) -> Result<PointCloud> {
        if m == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        if m > self.len() {
            return Err(Error::invalid(format!(
                "sample size {m} exceeds cloud size {}",
                self.len()
            )));
        }
        let indices = sample_indices(self.len(), m, seed);
        self.select(&indices)
    }
}
