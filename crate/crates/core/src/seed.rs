//! Deterministic sub-seed derivation.
//!
//! Every random stream is keyed by `(master seed, role tag, index)` so any
//! one of them can be regenerated without replaying the others.

pub const TAG_SOURCE: u64 = 0x534f_5552; // "SOUR"
pub const TAG_NOISE: u64 = 0x4e4f_4953; // "NOIS"
pub const TAG_TRIAL: u64 = 0x5452_4941; // "TRIA"

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed, a role tag and an index into an independent sub-seed.
pub fn derive(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
}
