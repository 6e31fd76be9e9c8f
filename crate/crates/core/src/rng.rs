//! Counter-keyed random draws.
//!
//! Every draw is addressed by `(seed, stream, index)` rather than by the
//! position in a sequential stream. Two runs that agree on the key agree on
//! the value no matter how many other draws happened in between, so the
//! sequential solver, the simulator and a one-thread parallel run all pick
//! the same coordinate at update `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id for the coordinate chosen at each update.
pub const COORD_STREAM: u64 = 0;
/// Stream id for staleness draws.
pub const STALENESS_STREAM: u64 = 1;
/// Stream ids at and above this value are free for generators.
pub const AUX_STREAM: u64 = 16;

/// Words per key; one ChaCha block.
const WORDS_PER_INDEX: u32 = 4;

#[derive(Debug, Clone)]
pub struct KeyedRng {
    rng: ChaCha8Rng,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Positions the generator at `(stream, index)` and returns it.
    #[inline]
    pub fn at(&mut self, stream: u64, index: u128) -> &mut ChaCha8Rng {
        self.rng.set_stream(stream);
        self.rng.set_word_pos(index << WORDS_PER_INDEX);
        &mut self.rng
    }

    /// Uniform index in `0..n` keyed by `(stream, index)`.
    #[inline]
    pub fn index(&mut self, stream: u64, index: u128, n: usize) -> usize {
        self.at(stream, index).gen_range(0..n)
    }

    /// The coordinate updated at global update number `t`.
    #[inline]
    pub fn coordinate(&mut self, t: u64, n: usize) -> usize {
        self.index(COORD_STREAM, t as u128, n)
    }
}

/// A plain sequential generator for data generation.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
