//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from a
//! single experiment seed, so the split, the GA and training can be re-run
//! independently of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    Balance,
    Ga,
    Init,
    Train,
    Teacher,
    Data,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Split => 1,
            Stream::Balance => 2,
            Stream::Ga => 3,
            Stream::Init => 4,
            Stream::Train => 5,
            Stream::Teacher => 6,
            Stream::Data => 7,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
