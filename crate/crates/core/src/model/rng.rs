//! Deterministic random streams. Every consumer of randomness gets its own
//! ChaCha stream keyed by the realization seed, so results do not depend on
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    HapIrs,
    IrsWd(u32),
    HapWd(u32),
    Position(u32),
    /// Fixed reflection phases of a benchmark scheme.
    SchemePhases(u32),
    /// Gaussian randomization; the payload mixes scheme, `t` and iteration.
    Randomization(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::HapIrs => 1 << 56,
            Stream::IrsWd(i) => (2 << 56) | i as u64,
            Stream::HapWd(i) => (3 << 56) | i as u64,
            Stream::Position(i) => (4 << 56) | i as u64,
            Stream::SchemePhases(s) => (5 << 56) | s as u64,
            Stream::Randomization(x) => (6 << 56) | (x & ((1 << 56) - 1)),
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// SplitMix64 finalizer, used to fold several integers into one stream key.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
