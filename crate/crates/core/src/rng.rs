//! Seed fan-out.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a root seed
//! and selected by a stream id, so parallel folds and grid points draw from
//! disjoint, reproducible sequences regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministically derive a child seed from a parent seed and a label.
pub fn child_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids used across the crate.
pub mod streams {
    pub const DEDUPE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SURROGATE: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const CLOZE: u64 = 6;
    pub const BASELINE: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(9, 1).random();
        let b: u64 = stream(9, 1).random();
        let c: u64 = stream(9, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(child_seed(1, 0), child_seed(1, 1));
        assert_eq!(child_seed(5, 3), child_seed(5, 3));
    }
}
