//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, index, role)`, so a
//! Monte Carlo run draws the same numbers no matter which worker executes it
//! or in which order runs are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct roles give independent streams for the
/// same `(seed, index)`, which keeps link draws independent of observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Observations = 1,
    Links = 2,
    Topology = 3,
    Models = 4,
    Auxiliary = 5,
}

/// Random stream for `(seed, index, role)`.
pub fn stream(seed: u64, index: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(&(role as u64).to_le_bytes());
    key[24..].copy_from_slice(b"cildp\x00\x00\x01");
    ChaCha8Rng::from_seed(key)
}
