//! Deterministic random streams.
//!
//! All estimators split their budget into fixed-size blocks; block `i` of a
//! run seeded with `seed` always sees the same ChaCha stream, so results are
//! bit-identical no matter how blocks are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BLOCK: u64 = 1 << 14;

/// RNG for block `block` of the stream identified by `seed`/`salt`.
pub fn block_rng(seed: u64, salt: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(block);
    rng
}

/// Derive a child seed from a parent seed and a string key (FNV-1a).
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in key.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Standard normal via Box–Muller.
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

/// Uniform point on the unit sphere S^{m-1}.
pub fn unit_sphere<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| gaussian(rng)).collect();
        let n = crate::geom::norm(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point in the unit ball B^m (rejection from the cube; m <= 4 in practice).
pub fn unit_ball<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if crate::geom::dot(&v, &v) <= 1.0 {
            return v;
        }
    }
}
