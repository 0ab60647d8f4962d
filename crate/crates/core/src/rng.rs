//! Reproducible random streams.
//!
//! Task `index` of domain `domain` under master seed `master` draws from
//! ChaCha8 keyed with the little-endian bytes of `(master, domain, 0, 0)` on
//! stream `index`. Streams never depend on scheduling, so parallel sampling
//! reproduces sequential sampling bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains used by the crate. Distinct domains never share a key.
pub mod domain {
    pub const LARGE_JUMPS: u64 = 1;
    pub const SMALL_JUMPS: u64 = 2;
    pub const UNIT_LEVEL: u64 = 3;
    pub const SIGMA_ESTIMATE: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const CHECKS: u64 = 6;
}

pub fn task_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
