//! Seed derivation for independent random streams.

/// Derives a stream seed from a base seed and an index (splitmix64 finalizer).
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).flat_map(|s| (0..10).map(move |i| mix_seed(s, i))).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(mix_seed(5, 3), mix_seed(5, 3));
    }
}
