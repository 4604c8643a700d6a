//! Deterministic random streams.
//!
//! Work is cut into fixed-size chunks and every chunk draws from its own
//! ChaCha8 stream selected by the chunk index. Output therefore depends only
//! on the seed and the chunk size, never on how many workers ran the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Items generated per independent substream.
pub const CHUNK_LEN: usize = 1 << 15;

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Splits `count` items into `(chunk_index, start, len)` triples.
pub fn chunks(count: usize) -> impl Iterator<Item = (u64, usize, usize)> {
    (0..count.div_ceil(CHUNK_LEN)).map(move |i| {
        let start = i * CHUNK_LEN;
        (i as u64, start, CHUNK_LEN.min(count - start))
    })
}
