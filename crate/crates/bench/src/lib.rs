//! Fixtures for the kernel benchmarks: seeded models, mixtures and batches
//! sized like the toy and tabular experiments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trde::{enumerate_circular, TermModel, TrdeModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Identity-ordered model with the usual initialization, `Z = 1`.
pub fn model(d: usize, k: usize, rank: usize, seed: u64) -> TrdeModel {
    TrdeModel::initialize(d, k, rank, (0..d).collect(), &mut rng(seed)).expect("valid sizes")
}

/// Mixture over `m` circular permutation classes.
pub fn mixture(d: usize, k: usize, rank: usize, m: usize, seed: u64) -> TermModel {
    let perms = enumerate_circular(d, Some(m), seed).expect("d >= 2");
    TermModel::initialize(d, k, rank, &perms, &mut rng(seed)).expect("valid sizes")
}

/// `n` points uniform in the unit cube.
pub fn batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng(seed);
    Array2::from_shape_fn((n, d), |_| rng.random())
}
