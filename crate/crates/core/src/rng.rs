//! Seeded random streams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream keyed by the
//! master seed and addressed by `(purpose, index)`. A block's noise therefore
//! depends only on the master seed and the block index, never on which worker
//! thread processed it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    /// Information bits or training symbols of one block.
    Data = 1,
    /// Channel noise of one block.
    Noise = 2,
    /// Neural parameter initialization.
    Init = 3,
    /// Per-pass shuffling of the training SNR schedule.
    Schedule = 4,
    /// Interleaver construction.
    Interleaver = 5,
    /// Ad hoc draws in tests and examples.
    Scratch = 6,
}

const INDEX_BITS: u32 = 56;

/// Returns the generator for `(master, purpose, index)`.
///
/// # Panics
///
/// Panics if `index` does not fit in 56 bits.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << INDEX_BITS, "stream index {index} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << INDEX_BITS) | index);
    rng
}
