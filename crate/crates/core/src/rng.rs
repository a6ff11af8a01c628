//! Seeded random streams.
//!
//! Every sampling routine takes the generator explicitly. ChaCha8 is a
//! counter-based stream cipher, so a seed fully determines the output on
//! every platform.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub use rand::Rng;
pub use rand_chacha::ChaCha8Rng as GjeRng;

/// Seed used for the synthetic experiments.
pub const DEFAULT_SEED: u64 = 111;

pub fn seeded(seed: u64) -> GjeRng {
    GjeRng::seed_from_u64(seed)
}

/// `rows × cols` matrix of independent standard normal draws, filled row by row.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}
