//! Seed fan-out. A single run seed is split into named, indexed substreams so
//! that results do not depend on scheduling order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from a parent seed, a stream tag and a list of indices.
pub fn derive(seed: u64, tag: &str, idx: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ tag_hash(tag));
    for &i in idx {
        h = splitmix(h ^ splitmix(i.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    h
}

pub fn substream(seed: u64, tag: &str, idx: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, tag, idx))
}
