//! Seed derivation for reproducible randomness.
//!
//! Every randomized operation takes a `u64` seed. Child seeds are derived with
//! a splitmix64 mix of `(parent, label)`, so independent streams (one per
//! encrypted bit, one per refresh) never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type FheRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `parent` and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ label.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d)
}

pub fn rng_from_seed(seed: u64) -> FheRng {
    FheRng::seed_from_u64(seed)
}

/// Cheap content hash of a word slice; used to key refresh randomness to the
/// ciphertext being refreshed.
pub(crate) fn hash_words(words: &[u32]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for chunk in words.chunks(2) {
        let w = chunk[0] as u64 | (chunk.get(1).copied().unwrap_or(0) as u64) << 32;
        h = (h ^ w).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(23);
    }
    splitmix64(h)
}
