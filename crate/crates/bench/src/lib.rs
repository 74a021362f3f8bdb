//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use sagin_core::ddpg::{Batch, Environment, Experience, RewardWeights};
use sagin_core::numerics::SimRng;
use sagin_core::scenario::{place_users, GeometryConfig, UserCount, UserDistribution};

/// Default scenario with its layout drawn from `seed`.
pub fn benchmark_environment(seed: u64) -> Environment {
    let cfg = GeometryConfig::default();
    let layout = place_users(&cfg, UserDistribution::Poisson, UserCount::Fixed(cfg.k_ue), &mut SimRng::new(seed, 0))
        .expect("default scenario places users");
    Environment::new(cfg, layout, None, RewardWeights::default(), seed, false).expect("default scenario is valid")
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SimRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.standard_normal())
}

/// A mini-batch of random transitions with the given widths.
pub fn random_batch(size: usize, state_dim: usize, action_dim: usize, rng: &mut SimRng) -> Batch {
    let exps: Vec<Experience> = (0..size)
        .map(|_| {
            Experience::new(
                (0..state_dim).map(|_| rng.standard_normal()).collect(),
                (0..action_dim).map(|_| 0.01 * rng.standard_normal()).collect(),
                rng.standard_normal(),
                (0..state_dim).map(|_| rng.standard_normal()).collect(),
            )
            .expect("finite transition")
        })
        .collect();
    Batch::from_experiences(&exps.iter().collect::<Vec<_>>()).expect("uniform widths")
}
