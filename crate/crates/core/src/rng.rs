//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator keyed by the master seed (8 bytes
//! little-endian, zero-padded to 32) with a 64-bit stream id:
//!
//! ```text
//! stream_id = domain << 56 | (sub & 0xFF_FFFF) << 32 | index
//! ```
//!
//! so a draw sequence depends only on `(master seed, domain, sub, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

pub const RNG_ALGORITHM: &str =
    "ChaCha20 (rand_chacha 0.9); key = master seed u64 LE zero-padded to 32 bytes; stream = domain<<56 | sub<<32 | index";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamDomain {
    /// Forward trajectories; `sub` is the slice index.
    Forward = 0,
    /// Backward trajectories; `sub` is the expansion order.
    Backward = 1,
    /// Grid resampling between slices; `sub` is the slice index.
    Resample = 2,
    Auxiliary = 3,
}

pub fn stream_id(domain: StreamDomain, sub: u32, index: u32) -> u64 {
    (domain as u64) << 56 | ((sub as u64) & 0xFF_FFFF) << 32 | index as u64
}

/// Independent generator for `(master_seed, stream_index)`.
pub fn seed_stream(master_seed: u64, stream_index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream_index);
    rng
}

pub fn domain_stream(master_seed: u64, domain: StreamDomain, sub: u32, index: u64) -> StreamRng {
    debug_assert!(index <= u32::MAX as u64);
    seed_stream(master_seed, stream_id(domain, sub, index as u32))
}
