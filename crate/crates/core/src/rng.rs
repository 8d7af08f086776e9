//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by the run
//! seed and a fixed stream id, so the Wiener increments of a trajectory and the
//! random phases of its initial estimate never share a sequence, and trajectories
//! with different seeds can be generated on any thread in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream carrying the Wiener increments of a conditioned trajectory.
pub const NOISE_STREAM: u64 = 0;
/// Stream carrying the random phases of a maximally uncertain estimate.
pub const ESTIMATE_STREAM: u64 = 1;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Gaussian increments `dW = sqrt(dt) z` of a Wiener process.
#[derive(Debug, Clone)]
pub struct WienerIncrements {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl WienerIncrements {
    pub fn new(seed: u64, dt: f64) -> Self {
        Self {
            rng: stream(seed, NOISE_STREAM),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sqrt_dt * z
    }

    /// Draws `len` increments at once.
    pub fn take(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.next_increment()).collect()
    }
}
