//! Portable seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a base seed with a tag into an independent seed.
pub fn derive_seed(seed: u64, tag: &[u8]) -> u64 {
    // FNV-1a over the tag, then mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in tag {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn stream(seed: u64, tag: &[u8]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag))
}
