//! Seeded stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is
//! derived from `(master seed, domain, indices...)` by a SplitMix64 chain.
//! Streams for different domains or indices never share state, so adding an
//! evaluation stage cannot perturb the randomness of a dynamics run, and a
//! run resumed at iteration `t` draws exactly what an uninterrupted run would.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Top-level randomness domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Keys: run index, then (iteration, player) or (iteration, sample).
    Dynamics = 1,
    /// Monte-Carlo evaluation; keys: (row, col) of a table cell.
    Evaluation = 2,
    MetaGame = 3,
    Exploit = 4,
    /// Reserved for tests and ad-hoc sampling.
    Scratch = 5,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit sub-seed from a seed and a key path.
pub fn derive_seed(seed: u64, domain: Domain, keys: &[u64]) -> u64 {
    let mut state = seed;
    let mut h = splitmix64(&mut state) ^ (domain as u64);
    for &k in keys {
        state = h ^ k.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        h = splitmix64(&mut state);
    }
    h
}

/// Independent stream for `(seed, domain, keys)`.
pub fn stream(seed: u64, domain: Domain, keys: &[u64]) -> StreamRng {
    let mut state = derive_seed(seed, domain, keys);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
