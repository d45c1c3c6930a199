//! Deterministic seed derivation for independent trial streams.
//!
//! Parallel estimators derive one seed per trial so that results do not
//! depend on worker count or scheduling.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for trial `index` of stream `stream` under `base`.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(base ^ stream.wrapping_mul(0xa076_1d64_78bd_642f)) ^ index)
}
