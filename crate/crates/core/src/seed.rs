//! Deterministic child-seed derivation.
//!
//! `derive_seed(master, role, index)` hashes the role tag with FNV-1a and
//! mixes it with the master seed and index through SplitMix64 finalizers.
//! The mapping is fixed here and does not depend on the standard library's
//! hasher.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, role: &str, index: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ fnv1a(role)) ^ index)
}
