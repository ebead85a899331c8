//! Deterministic seed derivation for episodes and evaluation runs.

/// SplitMix64 step.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and two indices (e.g. behavior and
/// run, or a single episode counter). Stable across platforms.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(a)).wrapping_add(splitmix64(b ^ 0x5851_f42d_4c95_7f2d)))
}
