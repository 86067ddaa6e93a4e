//! Counter-based random streams.
//!
//! Every Monte-Carlo trajectory draws from its own ChaCha stream keyed by
//! `(master_seed, trajectory_index)`, so results do not depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
