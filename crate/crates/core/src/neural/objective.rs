use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mdn::{mdn_nll_grad, Mdn};
use crate::error::{Error, Result};
use crate::linalg::{factor_with_policy, symmetrize};

pub const DEFAULT_EMA_MOMENTUM: f64 = 0.99;

/// Running estimate of the context covariance, held fixed within a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaCovariance {
    pub cov: DMatrix<f64>,
    pub momentum: f64,
}

impl EmaCovariance {
    /// Starts from the identity.
    pub fn new(d_c: usize, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1], got {momentum}")));
        }
        Ok(Self { cov: DMatrix::identity(d_c, d_c), momentum })
    }

    /// `cov ← m·cov + (1 − m)·Z_cᵀZ_c/N`, jittered if it stops factoring.
    pub fn update(&mut self, zc: &DMatrix<f64>) -> Result<()> {
        if zc.nrows() < 2 {
            return Err(Error::InvalidArgument("EMA covariance update needs at least two rows".into()));
        }
        if zc.ncols() != self.cov.nrows() {
            return Err(Error::DimensionMismatch(format!("batch has {} columns, covariance is {}", zc.ncols(), self.cov.nrows())));
        }
        let batch = symmetrize(&zc.tr_mul(zc)) / zc.nrows() as f64;
        let next = &self.cov * self.momentum + batch * (1.0 - self.momentum);
        let f = factor_with_policy(&next)?;
        self.cov = next;
        for i in 0..self.cov.nrows() {
            self.cov[(i, i)] += f.jitter();
        }
        Ok(())
    }
}

pub fn ema_cov_update(ema: &EmaCovariance, zc: &DMatrix<f64>) -> Result<EmaCovariance> {
    let mut next = ema.clone();
    next.update(zc)?;
    Ok(next)
}

/// How the context marginal enters the MDN objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMode {
    /// Batch mean of `½ z_cᵀ Σ⁻¹ z_c + ½ log|Σ|` with the EMA covariance.
    #[default]
    Mahalanobis,
    /// `−½ log|Z_cᵀZ_c/N + jitter·I|` on the batch, which spreads the contexts.
    EntropyMax,
    None,
}

/// Jitter for the entropy-maximization marginal.
pub const ENTROPY_JITTER: f64 = 1e-6;

/// The marginal term and its gradient with respect to each `z_c` row.
pub fn marginal_term(zc: &DMatrix<f64>, ema: &EmaCovariance, mode: MarginalMode) -> Result<(f64, DMatrix<f64>)> {
    let n = zc.nrows() as f64;
    match mode {
        MarginalMode::None => Ok((0.0, DMatrix::zeros(zc.nrows(), zc.ncols()))),
        MarginalMode::Mahalanobis => {
            let f = crate::linalg::chol_logdet(&ema.cov, 0.0)?;
            let maha = f.mahalanobis_rows(zc).sum() / n;
            let grad = f.solve(&zc.transpose()).transpose() / n;
            Ok((0.5 * maha + 0.5 * f.logdet(), grad))
        }
        MarginalMode::EntropyMax => {
            let mut c = symmetrize(&zc.tr_mul(zc)) / n;
            for i in 0..c.nrows() {
                c[(i, i)] += ENTROPY_JITTER;
            }
            let f = factor_with_policy(&c)?;
            let grad = -f.solve(&zc.transpose()).transpose() / n;
            Ok((-0.5 * f.logdet(), grad))
        }
    }
}

/// Value and gradients of the full MDN objective.
#[derive(Clone, Debug)]
pub struct GmjeMdnLoss {
    pub total: f64,
    pub marginal: f64,
    pub conditional: f64,
    pub params: Vec<f64>,
    /// Gradient with respect to the context batch, both terms included.
    pub contexts: DMatrix<f64>,
}

/// Marginal term plus the mean conditional NLL of `z_t` under the MDN on `z_c`.
pub fn gmje_mdn_loss(
    mdn: &Mdn,
    zc: &DMatrix<f64>,
    zt: &DMatrix<f64>,
    ema: &EmaCovariance,
    mode: MarginalMode,
) -> Result<GmjeMdnLoss> {
    let (marginal, g_marg) = marginal_term(zc, ema, mode)?;
    let (p, cache) = mdn.forward(zc)?;
    let (conditional, g) = mdn_nll_grad(&p, zt)?;
    let (params, g_in) = mdn.backward(&cache, &g);
    Ok(GmjeMdnLoss { total: marginal + conditional, marginal, conditional, params, contexts: g_in + g_marg })
}
