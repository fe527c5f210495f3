//! Deterministic stream seeds derived from a master seed.

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` of `stream` under `master`.
pub fn stream_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(master) ^ stream) ^ index)
}

pub const DATA_STREAM: u64 = 0;
pub const GLOBAL_SENS_STREAM: u64 = 1;
pub const NOISE_STREAM_BASE: u64 = 16;
