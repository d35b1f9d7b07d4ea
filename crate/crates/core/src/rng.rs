//! Counter-based seeded sampling: sample `i` depends only on `(seed, i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Writes `dim` standard normal draws for sample `index` into `out`.
pub fn gaussian_sample(seed: u64, index: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Uniform draws in `[lo, hi)` for sample `index`.
pub fn uniform_sample(seed: u64, index: u64, lo: f64, hi: f64, out: &mut [f64]) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    rng.set_stream(index);
    for v in out.iter_mut() {
        *v = rng.random_range(lo..hi);
    }
}
