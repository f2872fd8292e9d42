//! Counter-based random streams.
//!
//! Every simulated path owns two ChaCha streams, one for the regime chain and
//! one for the marks, selected by `(seed, path index, purpose)`. Paths can
//! therefore be generated in any order or in parallel with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Chain,
    Marks,
}

/// The generator for one `(seed, path, purpose)` triple.
pub fn stream(seed: u64, path: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = match purpose {
        Stream::Chain => 0,
        Stream::Marks => 1,
    };
    rng.set_stream(path.wrapping_mul(2).wrapping_add(lane));
    rng
}
