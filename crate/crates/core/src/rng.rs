//! Named random substreams derived from one top-level seed.
//!
//! Every consumer of randomness draws from its own ChaCha stream, so adding
//! draws to one (say, a longer horizon for arrivals) never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario,
    Arrivals,
    States,
    Trace,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Scenario => 1,
            Stream::Arrivals => 2,
            Stream::States => 3,
            Stream::Trace => 4,
        }
    }
}

/// Generator for `stream` in run `run` of the experiment seeded by `seed`.
pub fn substream(seed: u64, stream: Stream, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream.id() << 48) ^ run);
    rng
}
