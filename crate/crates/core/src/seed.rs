//! Stable seed derivation.
//!
//! Every random stream in a run is derived from the master seed through
//! [`derive_seed`], so any run, generation or trial layout can be rebuilt in
//! isolation. The mixing is FNV-1a over the little-endian inputs followed by
//! the SplitMix64 finalizer; it does not depend on `std`'s hasher, whose
//! output is not stable across releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(parent, label, index)`.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &parent.to_le_bytes());
    h = fnv1a(h, label.as_bytes());
    // separator so ("ab", 1) and ("a", ...) cannot collide by concatenation
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &index.to_le_bytes());
    splitmix64(h)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
