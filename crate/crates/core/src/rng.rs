//! Seeded random streams for reproducible parallel ensembles.
//!
//! Trajectory `k` of a run with master seed `s` draws from ChaCha8 stream `k`
//! keyed by `s`, so results never depend on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[inline]
pub fn uniform(rng: &mut TrajectoryRng) -> f64 {
    rng.random::<f64>()
}

#[inline]
pub fn standard_normal(rng: &mut TrajectoryRng) -> f64 {
    rng.sample(StandardNormal)
}
