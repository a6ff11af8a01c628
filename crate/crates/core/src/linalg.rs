//! Cholesky plumbing shared by every module.
//!
//! Factorizations go through [`SpdFactor`], which records the jitter that was
//! actually needed. [`factor_with_policy`] tries the matrix as given, then with
//! `1e-8` and `1e-6` added to the diagonal, before giving up.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter tried after a raw factorization fails.
pub const JITTER_LADDER: [f64; 2] = [1e-8, 1e-6];

/// Relative asymmetry accepted (and removed) on construction.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A successful Cholesky factorization `A + jitter·I = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
    jitter: f64,
}

impl SpdFactor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Jitter that was added to the diagonal before factorizing.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `xᵀ A⁻¹ x` through one triangular solve.
    pub fn mahalanobis(&self, x: &DVector<f64>) -> f64 {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    /// Row-wise squared Mahalanobis norms of an `N × d` matrix.
    pub fn mahalanobis_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&x.transpose())
            .expect("Cholesky factor has a positive diagonal");
        DVector::from_iterator(y.ncols(), y.column_iter().map(|c| c.norm_squared()))
    }

    /// `L x` for sampling.
    pub fn l_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = x.len();
        DVector::from_fn(n, |i, _| (0..=i).map(|j| l[(i, j)] * x[j]).sum())
    }
}

/// Factorize `cov + jitter·I` in a single attempt.
pub fn chol_logdet(cov: &DMatrix<f64>, jitter: f64) -> Result<SpdFactor> {
    if !cov.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {jitter}")));
    }
    check_symmetric(cov)?;
    let mut a = cov.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += jitter;
    }
    // nalgebra only reads the lower triangle, so an asymmetric input would
    // silently factor; the symmetry check above guards that.
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "{}x{} matrix failed Cholesky with jitter {jitter:e}",
            cov.nrows(),
            cov.ncols()
        ))
    })?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("non-positive pivot at {i}")));
        }
        logdet += d.ln();
    }
    Ok(SpdFactor { chol, logdet: 2.0 * logdet, jitter })
}

/// Factorize with the default jitter ladder: raw, then `1e-8`, then `1e-6`.
pub fn factor_with_policy(cov: &DMatrix<f64>) -> Result<SpdFactor> {
    let mut last = match chol_logdet(cov, 0.0) {
        Ok(f) => return Ok(f),
        Err(e @ Error::DimensionMismatch(_)) => return Err(e),
        Err(e) => e,
    };
    if is_asymmetric(cov) {
        return Err(last);
    }
    for &j in JITTER_LADDER.iter() {
        match chol_logdet(cov, j) {
            Ok(f) => return Ok(f),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn is_asymmetric(a: &DMatrix<f64>) -> bool {
    check_symmetric(a).is_err()
}

/// Rejects matrices whose asymmetry exceeds [`SYMMETRY_TOL`] relative to their scale.
pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale || !worst.is_finite() {
        return Err(Error::NotPositiveDefinite(format!(
            "matrix is asymmetric (max |A - A^T| = {worst:e})"
        )));
    }
    Ok(())
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Numerically stable `log Σ exp(x_i)`. Returns `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_spd;

    #[test]
    fn identity_has_zero_logdet() {
        let f = chol_logdet(&DMatrix::identity(3, 3), 0.0).unwrap();
        assert_eq!(f.logdet(), 0.0);
    }

    #[test]
    fn scaled_identity_logdet() {
        let f = chol_logdet(&(DMatrix::identity(2, 2) * 2.0), 0.0).unwrap();
        assert!((f.logdet() - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let mut rng = crate::rng::seeded(7);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 8);
            let f = chol_logdet(&a, 0.0).unwrap();
            let eig = a.clone().symmetric_eigen();
            let want: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
            assert!((f.logdet() - want).abs() < 1e-10, "{} vs {want}", f.logdet());
            let l = f.l();
            assert!((&l * l.transpose() - &a).amax() < 1e-8);
        }
    }

    #[test]
    fn jitter_is_added_to_the_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(chol_logdet(&a, 0.0).is_err());
        let f = chol_logdet(&a, 1e-3).unwrap();
        let l = f.l();
        let back = &l * l.transpose();
        assert!((back[(0, 0)] - 1.001).abs() < 1e-12);
        assert!((back[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn policy_climbs_the_ladder() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = factor_with_policy(&a).unwrap();
        assert_eq!(f.jitter(), 1e-8);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(factor_with_policy(&bad), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.5, 2.0]);
        assert!(matches!(chol_logdet(&a, 0.0), Err(Error::NotPositiveDefinite(_))));
        assert!(factor_with_policy(&a).is_err());
    }

    #[test]
    fn mahalanobis_matches_dense_inverse() {
        let mut rng = crate::rng::seeded(3);
        let a = random_spd(&mut rng, 5);
        let f = chol_logdet(&a, 0.0).unwrap();
        let x = crate::rng::standard_normal(&mut rng, 5, 1).column(0).into_owned();
        let dense = (x.transpose() * a.clone().try_inverse().unwrap() * &x)[(0, 0)];
        assert!((f.mahalanobis(&x) - dense).abs() < 1e-10);
        let xs = crate::rng::standard_normal(&mut rng, 4, 5);
        let rows = f.mahalanobis_rows(&xs);
        for i in 0..4 {
            let xi = xs.row(i).transpose();
            assert!((rows[i] - f.mahalanobis(&xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert!((logsumexp(&[-1e6, -1e6]) - (-1e6 + 2f64.ln())).abs() < 1e-9);
        assert!((logsumexp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
    }
}
