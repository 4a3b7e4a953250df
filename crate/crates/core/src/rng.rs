//! Counter-based random streams.
//!
//! Every consumer draws from a ChaCha8 stream addressed by `(seed, stream id)`.
//! Stream ids are built from a domain tag and an index so that two subsystems
//! never share a stream, which keeps results independent of the thread
//! schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain tags occupy the top 16 bits of a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Domain {
    Ulam = 1,
    Excursion = 2,
    ReturnProbs = 3,
    Validation = 4,
    Hypotheses = 5,
    Envelope = 6,
    Mixture = 7,
    Bootstrap = 8,
    Invariance = 9,
    Pullback = 10,
    User = 0xff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw stream by id.
    pub fn stream(&self, id: u64) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    /// Stream for `index` inside `domain`; indices are truncated to 48 bits.
    pub fn substream(&self, domain: Domain, index: u64) -> Stream {
        self.stream(((domain as u64) << 48) | (index & 0xffff_ffff_ffff))
    }

    /// A child factory with a derived seed, for nesting whole pipelines.
    pub fn fork(&self, salt: u64) -> StreamFactory {
        let mut rng = self.stream(0xfeed_0000_0000_0000 ^ salt);
        StreamFactory::new(rng.gen())
    }
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}
