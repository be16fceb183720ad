use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded ChaCha8 generator addressed by `(seed, stream)`.
///
/// Distinct stream ids give independent sequences from the same master seed, so each
/// chain, replicate or resampling iteration owns its own stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
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

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Stream-id layout shared by the synthesizers, bounds and simulator.
pub mod streams {
    pub const CHAIN: u64 = 0;
    pub const SIMULATE: u64 = u64::MAX;

    /// Synthesis stream of replicate `l` (0-based).
    pub fn replicate(l: usize) -> u64 {
        1 + l as u64
    }

    /// Resampling stream of bounds iteration `t` under scenario `scenario_tag`.
    pub fn bounds(scenario_tag: u64, t: usize) -> u64 {
        (scenario_tag << 32) | t as u64
    }
}
