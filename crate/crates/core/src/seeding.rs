/// 64-bit FNV-1a.
pub(crate) fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Sub-seed for one keyed unit of work, independent of processing order.
pub(crate) fn derive_seed(seed: u64, key: &str) -> u64 {
    seed ^ fnv1a(key)
}
