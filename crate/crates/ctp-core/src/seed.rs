//! Deterministic derivation of per-component RNG seeds from a master seed.
//!
//! Every seeded stage of the pipeline (k-means init, each forest tree, each
//! per-cluster classifier) gets its own stream derived here, so that e.g. a
//! single-cluster hybrid model trains its classifier with exactly the same
//! seed as the equivalent standalone model.

/// Mixes a master seed with a component index into an independent 64-bit seed.
///
/// This is a fixed avalanche mix (splitmix64 finalizer over the sum); it is
/// pure and stable, so seed layouts are part of the output contract.
pub fn derive(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Derives a seed for a named (rather than indexed) component, e.g. "kmeans".
pub fn derive_label(master: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes, then the same avalanche mix.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(master ^ mix64(h))
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
