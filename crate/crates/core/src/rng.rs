//! Per-trajectory random streams.
//!
//! Trajectory `i` of an ensemble draws from ChaCha8 keyed by the master seed
//! with stream id `i`, so its numbers do not depend on how many trajectories
//! run, in which order, or on how many threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
