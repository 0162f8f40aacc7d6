//! Deterministic RNG streams.
//!
//! Every random decision is drawn from a stream keyed by the global seed
//! and a tuple of tags (epoch, node, metapath, ...), so results do not
//! depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Stable 64-bit tag for a string (FNV-1a).
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

// Stream domains, so different consumers never share a stream.
pub(crate) const DOMAIN_SAMPLING: u64 = 1;
pub(crate) const DOMAIN_INIT: u64 = 2;
pub(crate) const DOMAIN_PAIRS: u64 = 3;
pub(crate) const DOMAIN_SPLIT: u64 = 4;
pub(crate) const DOMAIN_EVAL: u64 = 5;
pub(crate) const DOMAIN_WALKS: u64 = 6;
pub(crate) const DOMAIN_SYNTH: u64 = 7;
