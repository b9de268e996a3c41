//! Seeding.
//!
//! Every Monte Carlo path gets its own ChaCha8 stream: the key comes from the
//! master seed and the stream id is the path index. A path therefore draws the
//! same numbers no matter which thread runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for path `index` under `master`.
pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Generator for a single stand-alone simulation.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent master seed for a named sub-experiment.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    mix64(master ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a sequence of words into 64 bits.
#[inline]
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for &w in words {
        h = mix64(h ^ w.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h
}

/// Standard normal that is a pure function of `(seed, words)`.
///
/// Used where values must be reproducible on demand in any order,
/// e.g. when a path is refined lazily.
pub fn keyed_normal(seed: u64, words: &[u64]) -> f64 {
    let h1 = hash_words(seed, words);
    let h2 = mix64(h1 ^ 0xd6e8_feb8_6659_fd93);
    // uniforms in (0, 1]
    let u1 = ((h1 >> 11) as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0);
    let u2 = (h2 >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = path_rng(7, 0).gen();
        let b: u64 = path_rng(7, 1).gen();
        let c: u64 = path_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn keyed_normal_moments() {
        let n = 200_000;
        let (mut s, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let z = keyed_normal(3, &[i, 17]);
            s += z;
            s2 += z * z;
            s4 += z * z * z * z;
        }
        let n = n as f64;
        assert!((s / n).abs() < 0.01);
        assert!((s2 / n - 1.0).abs() < 0.01);
        assert!((s4 / n - 3.0).abs() < 0.06);
    }
}
