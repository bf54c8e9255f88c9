//! Keyed deterministic draws.
//!
//! Every random quantity in a world, a profiling run or a scenario is a pure
//! function of `(seed, stream, request, prefix)`, so results never depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent draw streams. Distinct constants keep e.g. the outcome and
/// latency draws of the same `(request, prefix)` uncorrelated.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    Difficulty = 0x01,
    NodeOffset = 0x02,
    RowFactor = 0x03,
    Outcome = 0x04,
    Latency = 0x05,
    Cascade = 0x06,
    Requests = 0x07,
    ScenarioNoise = 0x08,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn key(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed ^ (stream as u64).rotate_left(56));
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(17))
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn standard_normal(key: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    StandardNormal.sample(&mut rng)
}

pub fn rng(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}

/// Stable hash of a model-id sequence, extended one id at a time.
pub fn extend_prefix_hash(parent: u64, model_id: &str) -> u64 {
    // FNV-1a over the id bytes, then mixed with the parent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in model_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(parent.rotate_left(7) ^ h)
}

pub const ROOT_PREFIX_HASH: u64 = 0x005E_ED0F_7A1E;

/// Multiplicative lognormal factor with unit mean.
pub fn lognormal_unit_mean(sigma: f64, z: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else {
        (sigma * z - 0.5 * sigma * sigma).exp()
    }
}
