//! Seeded, splittable randomness. Every random object is keyed by `(seed, stream)`
//! so that results never depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags that keep independent consumers of one user seed apart.
pub mod streams {
    pub const SKETCH: u64 = 0x5345_0000_0000_0000;
    pub const OSE: u64 = 0x4f53_0000_0000_0000;
    pub const PROBE: u64 = 0x5052_0000_0000_0000;
    pub const POWER: u64 = 0x504f_0000_0000_0000;
    pub const INSTANCE: u64 = 0x494e_0000_0000_0000;
    pub const SYMCHECK: u64 = 0x5359_0000_0000_0000;
}

/// Counter-based generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed; used when a component needs a whole family of streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn rademacher_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}
