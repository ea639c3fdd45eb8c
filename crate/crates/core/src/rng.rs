//! Counter-based random numbers: every draw is a pure function of
//! `(master_seed, trajectory_id, interval, site, purpose)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
    pub trajectory_id: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Whether a site is measured in an interval.
    Measure = 0,
    /// Born threshold `m` of a measured site.
    Threshold = 1,
    /// Free-form draws (single-site Monte Carlo).
    Auxiliary = 2,
}

impl RngPolicy {
    pub fn new(master_seed: u64, trajectory_id: u64) -> Self {
        Self { master_seed, trajectory_id }
    }

    /// Uniform number in the open interval (0, 1).
    pub fn uniform(&self, interval: u64, site: u64, purpose: Purpose) -> f64 {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.trajectory_id.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(interval);
        rng.set_word_pos((site as u128 * 4 + purpose as u128) * 2);
        let u = rng.next_u64();
        ((u >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}
