//! Seed fan-out.
//!
//! A single master seed is expanded into independent streams with
//! `derive(master, stream, a, b)`, which folds each word into a SplitMix64
//! state:
//!
//! ```text
//! h = mix(master ^ GOLDEN)
//! h = mix(h ^ stream_tag)
//! h = mix(h ^ a)
//! h = mix(h ^ b)
//! ```
//!
//! where `mix` is the SplitMix64 finaliser. Streams are keyed by what they
//! drive (dataset, split, partition, noise, init, client sampling, client
//! work), so extending a run to more rounds leaves earlier rounds untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Named seed streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Dataset = 1,
    Split = 2,
    Partition = 3,
    Noise = 4,
    Init = 5,
    /// Keyed by round.
    ClientSampling = 6,
    /// Keyed by (client id, round).
    Client = 7,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = mix(master ^ GOLDEN);
    h = mix(h ^ stream as u64);
    h = mix(h ^ a);
    mix(h ^ b)
}

/// The generator used everywhere in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience for `rng(derive(..))`.
pub fn stream_rng(master: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    rng(derive(master, stream, a, b))
}
