//! Seeded random streams.
//!
//! Every trial owns one seed. Independent ChaCha streams are carved out of it
//! by stream id, so the noise sequence of sensor `i` never depends on how many
//! other sensors exist or in what order they are sampled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

const SETUP_STREAM: u64 = u64::MAX;
const GUESS_STREAM_BASE: u64 = 1 << 32;

/// Stream factory for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeed(pub u64);

impl TrialSeed {
    pub fn stream(self, id: u64) -> SeededRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }

    /// Measurement noise for sensor `i`.
    pub fn sensor_noise(self, i: usize) -> SeededRng {
        self.stream(i as u64)
    }

    /// Initial estimate draws for estimator `i`.
    pub fn initial_guess(self, i: usize) -> SeededRng {
        self.stream(GUESS_STREAM_BASE + i as u64)
    }

    /// Initial sensor placement.
    pub fn setup(self) -> SeededRng {
        self.stream(SETUP_STREAM)
    }
}
