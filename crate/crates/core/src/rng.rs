//! Deterministic, splittable random number streams.
//!
//! Every random draw in the library comes from a `(seed, stream)` pair:
//! the seed identifies the run, the stream separates independent consumers
//! (ensemble member 0..L-1 initializations, point-set sampling, ...).
//! ChaCha is counter-based, so identical `(seed, stream)` pairs produce
//! identical sequences on every platform regardless of execution order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id used for sampling candidate point sets.
pub const STREAM_POINTS: u64 = 1_000_000;

/// Stream id for the initialization of ensemble member `l` (0-based).
pub const fn member_stream(member: usize) -> u64 {
    member as u64
}

/// A seeded, stream-addressed RNG.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for SeededRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    #[inline]
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    #[inline]
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
