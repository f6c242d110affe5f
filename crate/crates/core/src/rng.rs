//! Stream-addressed seeding.
//!
//! Every random quantity in a trial is drawn from its own ChaCha stream whose seed is a
//! stable hash of the master seed, the trial index and a tag naming the quantity (plus
//! up to two indices). Streams never depend on how many other quantities exist, so
//! adding a helper or a RIS element leaves every other draw untouched. This keeps
//! configurations that differ only in `K`, `J` or `p_max` paired realization by
//! realization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers. The discriminant is part of the hash, so never renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PapPosition = 1,
    HelperPosition = 2,
    DevicePosition = 3,
    Direct = 10,
    DeviceHelper = 11,
    HelperAp = 12,
    DeviceRis = 13,
    RisAp = 14,
    DirectEstimate = 20,
    DeviceHelperEstimate = 21,
    HelperApEstimate = 22,
    CascadeEstimate = 23,
    RandomClassification = 30,
    RandomPhases = 31,
    ScaInit = 32,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive stable hash of a word sequence.
pub fn stable_hash(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// RNG for one named stream of one trial.
pub fn stream_rng(master_seed: u64, trial: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[master_seed, trial, stream as u64, a, b]))
}
