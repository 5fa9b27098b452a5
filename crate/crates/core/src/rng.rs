//! Seed derivation. Every random draw in a run comes from a ChaCha stream
//! addressed by `(master seed, purpose, counter, index)`, so collection on a
//! given worker never depends on what another worker consumed and a resumed
//! run can rebuild any stream from the update counter alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    Rollout = 2,
    Shuffle = 3,
    Eval = 4,
    Sweep = 5,
}

/// Independent generator for `(purpose, counter, index)` under `seed`.
pub fn stream(seed: u64, purpose: Purpose, counter: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 8 bits purpose | 40 bits counter | 16 bits index
    let id = ((purpose as u64) << 56) | ((counter & 0xFF_FFFF_FFFF) << 16) | (index & 0xFFFF);
    rng.set_stream(id);
    rng
}

/// Derived integer seed, for APIs that take a `u64` (network init).
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, 0, index).next_u64()
}
