use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of coordinates into one 64-bit stream key.
pub(crate) fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6d71_7373_645f_7631, |acc, &p| mix(acc ^ mix(p)))
}

/// A random stream determined only by `parts`, independent of call order.
pub(crate) fn keyed_rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(parts))
}
