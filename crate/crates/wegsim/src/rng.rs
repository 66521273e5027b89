//! Seeded, splittable random streams.
//!
//! Every stochastic component owns its own generator derived from a base
//! seed plus a path of labels (stream vs. policy, repetition index, sweep
//! index). Derivation is a SplitMix64 absorb chain, so streams are
//! independent, order-free to construct, and stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Label for the stream-generation branch of a run.
pub const BRANCH_STREAM: u64 = 0x5354_5245_414d_0001;
/// Label for the policy/classifier-randomness branch of a run.
pub const BRANCH_POLICY: u64 = 0x504f_4c49_4359_0002;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of labels into a single 64-bit key.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for &label in path {
        state ^= label;
        out = splitmix64(&mut state);
    }
    out
}

/// Build a generator from a base seed and a derivation path.
pub fn derive_rng(base: u64, path: &[u64]) -> ChaCha8Rng {
    let key = derive_seed(base, path);
    let mut state = key;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
