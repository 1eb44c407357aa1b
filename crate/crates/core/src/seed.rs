//! Deterministic seed derivation.
//!
//! Every random stage of the pipeline draws from its own ChaCha8 stream.
//! The seed for a stage is
//!
//! ```text
//! stage_seed = splitmix64(master_seed ^ fnv1a64(stage_name))
//! block_seed = splitmix64(stage_seed ^ splitmix64(block_index))
//! ```
//!
//! Both functions are fixed here so that any schedule over blocks (serial or
//! parallel) reproduces the same tags.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stage_seed(master: u64, stage: &str) -> u64 {
    splitmix64(master ^ fnv1a64(stage.as_bytes()))
}

pub fn block_seed(stage_seed: u64, block: u64) -> u64 {
    splitmix64(stage_seed ^ splitmix64(block))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn stage_names_separate_streams() {
        let a = stage_seed(7, "splitter");
        let b = stage_seed(7, "det_A");
        assert_ne!(a, b);
        assert_eq!(a, stage_seed(7, "splitter"));
        assert_ne!(block_seed(a, 0), block_seed(a, 1));
    }
}
