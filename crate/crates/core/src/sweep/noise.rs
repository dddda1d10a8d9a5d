use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for cell `(i, j)`; independent of evaluation order.
pub fn cell_rng(seed: u64, i: usize, j: usize) -> ChaCha8Rng {
    let k = splitmix(splitmix(splitmix(seed) ^ i as u64) ^ (j as u64).rotate_left(32));
    ChaCha8Rng::seed_from_u64(k)
}

/// Multiplies the magnitude by `1 + fraction * n`, `n ~ N(0, 1)`; the phase is untouched.
pub fn apply_amplitude_noise(z: Complex64, fraction: f64, seed: u64, i: usize, j: usize) -> Complex64 {
    if fraction == 0.0 {
        return z;
    }
    let n: f64 = StandardNormal.sample(&mut cell_rng(seed, i, j));
    z * (1.0 + fraction * n).max(0.0)
}
