//! Seeded random streams.
//!
//! Every experiment seed owns one ChaCha key; each consumer of randomness
//! reads its own stream of that key, so changing how one consumer draws
//! never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The independent consumers of randomness inside one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialPool = 0,
    ModelInit = 1,
    Shuffle = 2,
    Selection = 3,
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
