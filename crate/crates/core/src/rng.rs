//! Counter-based random substreams.
//!
//! Frame `i` of a stack draws from ChaCha8 keyed by the master seed with the
//! stream id set to `i`, so any frame can be regenerated on its own and the
//! output never depends on which worker produced it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(master_seed, index)`.
pub fn substream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
