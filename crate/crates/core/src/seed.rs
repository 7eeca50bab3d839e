//! Deterministic derivation of per-replicate RNG seeds.
//!
//! Every Monte Carlo routine in this crate seeds replicate `r` of stream
//! `label` with `derive_seed(base, r, label)`, so replicates are independent
//! in practice and identical regardless of how work is scheduled across
//! threads.

/// SplitMix64 finalizer: a full-avalanche mix of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// FNV-1a over the stream label, for domain separation between streams.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xCBF29CE484222325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001B3);
    }
    h
}

/// Derives the seed for one replicate of one named stream:
/// `mix(mix(mix(base) ^ fnv1a(stream)) ^ replicate)`.
pub fn derive_seed(base: u64, replicate: u64, stream: &str) -> u64 {
    mix(mix(mix(base) ^ fnv1a(stream.as_bytes())) ^ replicate)
}
