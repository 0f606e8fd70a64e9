//! Seeded Brownian increments with one independent stream per path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator for path `path` of a run seeded with `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// `steps × d` increments of a `d`-dimensional Brownian motion over steps of length `dt`.
pub fn brownian_increments(seed: u64, path: u64, steps: usize, d: usize, dt: f64) -> Vec<Vec<f64>> {
    let mut rng = path_rng(seed, path);
    let s = dt.sqrt();
    (0..steps)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * s
                })
                .collect()
        })
        .collect()
}

/// Sums consecutive blocks of `factor` increments (same path on a coarser time grid).
pub fn coarsen(increments: &[Vec<f64>], factor: usize) -> Vec<Vec<f64>> {
    increments
        .chunks(factor)
        .map(|block| {
            let d = block[0].len();
            (0..d).map(|i| block.iter().map(|w| w[i]).sum()).collect()
        })
        .collect()
}
