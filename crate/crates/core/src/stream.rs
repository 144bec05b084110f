//! Deterministic per-client pseudorandom streams.
//!
//! Every simulated client owns its own ChaCha8 stream. The key is derived
//! from the master seed and an experiment scope (protocol, budget cell, run),
//! the ChaCha stream id is the client id, and each round starts at its own
//! block offset. Round 0 is the memoization round; rounds `1..=tau` are the
//! reports. Any client/round can therefore be regenerated in isolation and
//! results do not depend on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per round. A UE report over k bits draws k words, so this
/// leaves room for domains far larger than anything realistic.
const WORDS_PER_ROUND: u128 = 1 << 36;

/// SplitMix64 finalizer, used to fold scope components into one key.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies a family of client streams, e.g. one Monte Carlo run of one
/// protocol at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamScope {
    key: [u8; 32],
}

impl StreamScope {
    /// Builds a scope from the master seed and any number of scope labels.
    pub fn new(master_seed: u64, labels: &[u64]) -> Self {
        let mut state = mix64(master_seed);
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            for &label in labels {
                state = mix64(state ^ label);
            }
            state = mix64(state ^ i as u64);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    /// The stream of `client` for `round` (0 = memoization, t >= 1 = report t).
    pub fn client_round(&self, client: u64, round: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(client);
        rng.set_word_pos(u128::from(round) * WORDS_PER_ROUND);
        rng
    }
}
