//! Reproducible random streams.
//!
//! Every random consumer gets its own ChaCha8 stream, addressed by a master
//! seed and a 64-bit stream id. Streams with different ids never overlap, so
//! replicates and per-dataset chains are independent and can run in any
//! order or in parallel with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable stream id derived from a text label (e.g. a dataset key), so that
/// a dataset's stream does not depend on which other files are processed.
pub fn stream_id(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
