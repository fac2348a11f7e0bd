//! Deterministic sub-seed derivation so independent RNG lanes never share
//! state across seeds or lanes.

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for `lane` from a base seed. Two mixing rounds keep
/// distinct `(seed, lane)` pairs apart even for adjacent base seeds.
pub(crate) fn derive(seed: u64, lane: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(lane.wrapping_mul(0xA076_1D64_78BD_642F)))
}
