//! Deterministic seed derivation for per-item work.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one item of a batch job, independent of processing order.
pub fn item_seed(global: u64, item_id: u64) -> u64 {
    mix64(mix64(global) ^ item_id.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed for a named sub-stream (e.g. "augment", "kmeans").
pub fn stream_seed(global: u64, stream: &str) -> u64 {
    stream
        .bytes()
        .fold(mix64(global), |acc, b| mix64(acc ^ u64::from(b)))
}
