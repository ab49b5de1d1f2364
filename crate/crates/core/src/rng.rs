//! Seeded random streams.
//!
//! Every random draw in the library comes from a ChaCha8 generator, which is
//! counter based and produces the same stream on every platform. A trial is
//! identified by a 64-bit seed; independent consumers inside a trial (offline
//! data collection, online environment, ...) read from distinct ChaCha
//! streams of that seed so that adding draws to one never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named ChaCha stream identifiers used within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Offline = 1,
    Online = 2,
    Environment = 3,
    Agent = 4,
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws an index from a probability vector by inverse CDF.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw above the accumulated total.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
