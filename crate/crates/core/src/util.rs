//! Shared plumbing: content hashing, seeded sub-stream RNGs, and the
//! integer-robust rounding helpers used by the quantile and count rules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a 64-bit hash. Used for content fingerprints (lexicon versions,
/// profile artifacts, workload/config fingerprints), not for security.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Hex rendering of [`fnv1a64`], the canonical fingerprint format.
pub fn fingerprint(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Derives a deterministic RNG for a named sub-stream of one root seed.
///
/// Every random decision in the pipeline (arrival gaps, dataset shuffles,
/// malicious-subset picks, weight init, batch order) draws from its own
/// named stream so components can be varied independently without
/// perturbing the others.
pub fn substream(root_seed: u64, name: &str) -> ChaCha12Rng {
    let mut key = Vec::with_capacity(8 + name.len());
    key.extend_from_slice(&root_seed.to_le_bytes());
    key.extend_from_slice(name.as_bytes());
    ChaCha12Rng::seed_from_u64(fnv1a64(&key))
}

/// Smallest integer >= x, computed with a 1e-9 slack so that products such
/// as 0.3 * 100 (which lands at 30.000000000000004 in binary floating
/// point) still round to the mathematically intended 30.
pub fn robust_ceil(x: f64) -> usize {
    let c = (x - 1e-9).ceil();
    if c < 0.0 {
        0
    } else {
        c as usize
    }
}

/// Largest integer <= x, with the same 1e-9 slack as [`robust_ceil`] so
/// products that land epsilon under an integer still floor to it.
pub fn robust_floor(x: f64) -> usize {
    let f = (x + 1e-9).floor();
    if f < 0.0 {
        0
    } else {
        f as usize
    }
}

/// Nearest-rank index for quantile level `k` over `n` sorted values:
/// ceil(k*n) - 1, clamped into [0, n-1]. Uses [`robust_ceil`] so that
/// exact-integer products of `k*n` are not bumped up by float error.
pub fn nearest_rank_index(k: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    let rank = robust_ceil(k * n as f64).max(1).min(n);
    rank - 1
}

/// Quantizes a time in seconds to whole microseconds. All simulator event
/// times pass through this so tie-breaking never depends on sub-microsecond
/// float residue.
pub fn quantize_us(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}

/// Inverse of [`quantize_us`].
pub fn us_to_seconds(us: u64) -> f64 {
    us as f64 / 1e6
}
