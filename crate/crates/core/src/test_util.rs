use nalgebra::{DMatrix, DVector};

use crate::gaussian::JointGaussian;
use crate::rng::{standard_normal, GjeRng};

/// Well-conditioned random SPD matrix.
pub fn random_spd(rng: &mut GjeRng, d: usize) -> DMatrix<f64> {
    let g = standard_normal(rng, d, d);
    let a = &g * g.transpose() / d as f64 + DMatrix::identity(d, d) * 0.3;
    (&a + a.transpose()) * 0.5
}

pub fn random_joint(rng: &mut GjeRng, dc: usize, dt: usize) -> JointGaussian {
    let d = dc + dt;
    let mean: DVector<f64> = standard_normal(rng, d, 1).column(0).into_owned();
    JointGaussian::from_full(&mean, &random_spd(rng, d), dc).unwrap()
}
