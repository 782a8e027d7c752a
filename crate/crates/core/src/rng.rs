//! Seed derivation. Every consumer of randomness gets its own ChaCha stream
//! keyed by `(base seed, purpose, index...)`, so changing one part of an
//! experiment (the association policy, the scheduling rule) never shifts the
//! random numbers seen by another part.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named purposes for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Data = 2,
    Channel = 3,
    Mobility = 4,
    Association = 5,
    Scheduling = 6,
    Training = 7,
    Model = 8,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a base seed with a sequence of words. The accumulator is rotated
/// before each word so that the base and the words do not commute.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(base), |acc, &w| mix64(acc.rotate_left(29) ^ mix64(w)))
}

pub fn stream(base: u64, purpose: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, &[purpose as u64]))
}

pub fn substream(base: u64, purpose: Stream, a: u64, b: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, &[purpose as u64, a, b]))
}
