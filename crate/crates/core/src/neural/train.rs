use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::mdn::{Mdn, MdnConfig, DEFAULT_SIGMA_FLOOR};
use super::mlp::{flatten_layers, Mlp};
use super::objective::{gmje_mdn_loss, EmaCovariance, MarginalMode, DEFAULT_EMA_MOMENTUM};
use crate::error::{Error, Result};

/// Full-batch training settings for the deterministic predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], epochs: 1200, adam: AdamConfig::default() }
    }
}

/// Fits `ŷ = g(x)` by full-batch Adam on `(1/N) Σ ‖ŷ − y‖²`.
///
/// Returns the network and the loss before every step.
pub fn jepa_mse_train<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Mlp, Vec<f64>)> {
    check_pairs(x, y)?;
    let mut dims = vec![x.ncols()];
    dims.extend(&cfg.hidden);
    dims.push(y.ncols());
    let mut net = Mlp::new(&dims, false, rng)?;
    let mut params = net.flatten();
    let mut state = AdamState::new(params.len());
    let n = x.nrows() as f64;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (out, cache) = net.forward(x)?;
        let resid = out - y;
        let loss = resid.norm_squared() / n;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        losses.push(loss);
        let grads = flatten_layers(&net.backward(&cache, &(resid * (2.0 / n))).0);
        adam_step(&mut params, &grads, &mut state, &cfg.adam);
        net.unflatten(&params);
    }
    Ok((net, losses))
}

/// Full-batch training settings for the mixture density network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdnTrainConfig {
    pub k: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub sigma_floor: f64,
    pub marginal: MarginalMode,
    pub ema_momentum: f64,
}

impl Default for MdnTrainConfig {
    fn default() -> Self {
        Self {
            k: 3,
            hidden: vec![64, 64],
            epochs: 1200,
            adam: AdamConfig::default(),
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            marginal: MarginalMode::Mahalanobis,
            ema_momentum: DEFAULT_EMA_MOMENTUM,
        }
    }
}

/// A trained MDN with its loss curve and the final context covariance.
#[derive(Clone, Debug)]
pub struct MdnFit {
    pub mdn: Mdn,
    /// Total loss before every step.
    pub losses: Vec<f64>,
    pub ema: EmaCovariance,
}

/// Trains an MDN on `p(z_t | z_c)` with the full objective.
///
/// The EMA covariance is refreshed from each batch after the step that used it.
pub fn mdn_train<R: Rng + ?Sized>(
    zc: &DMatrix<f64>,
    zt: &DMatrix<f64>,
    cfg: &MdnTrainConfig,
    rng: &mut R,
) -> Result<MdnFit> {
    check_pairs(zc, zt)?;
    let config = MdnConfig {
        hidden: cfg.hidden.clone(),
        sigma_floor: cfg.sigma_floor,
        ..MdnConfig::new(zc.ncols(), zt.ncols(), cfg.k)
    };
    let mut mdn = Mdn::new(config, rng)?;
    let mut ema = EmaCovariance::new(zc.ncols(), cfg.ema_momentum)?;
    let mut params = mdn.flatten();
    let mut state = AdamState::new(params.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let l = gmje_mdn_loss(&mdn, zc, zt, &ema, cfg.marginal)?;
        if !l.total.is_finite() || l.params.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        losses.push(l.total);
        adam_step(&mut params, &l.params, &mut state, &cfg.adam);
        mdn.unflatten(&params);
        ema.update(zc)?;
    }
    Ok(MdnFit { mdn, losses, ema })
}

fn check_pairs(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() || x.nrows() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need matching inputs and targets with at least two rows, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

/// Exponentially smoothed copy of a loss curve.
pub fn ema_smooth(values: &[f64], beta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = match values.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in values {
        acc = beta * acc + (1.0 - beta) * v;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::synth::{eval_grid, gen_dataset_a};

    fn grid_matrix(n: usize) -> DMatrix<f64> {
        let g = eval_grid(n).unwrap();
        DMatrix::from_column_slice(n, 1, g.as_slice())
    }

    fn rmse(a: &DMatrix<f64>, b: impl Fn(f64) -> f64, grid: &DMatrix<f64>) -> f64 {
        let s: f64 = (0..grid.nrows()).map(|i| (a[(i, 0)] - b(grid[(i, 0)])).powi(2)).sum();
        (s / grid.nrows() as f64).sqrt()
    }

    #[test]
    fn fits_a_single_noiseless_branch() {
        let mut rng = seeded(1);
        let x = DMatrix::from_fn(400, 1, |_, _| rng.random_range(-1.0..=1.0));
        let y = x.map(|v| v * v * v);
        let (net, _) = jepa_mse_train(&x, &y, &TrainConfig::default(), &mut rng).unwrap();
        let g = grid_matrix(300);
        assert!(rmse(&net.predict(&g).unwrap(), |v| v * v * v, &g) <= 0.02);
    }

    #[test]
    fn constant_targets_give_a_constant_predictor() {
        let mut rng = seeded(2);
        let x = DMatrix::from_fn(200, 1, |_, _| rng.random_range(-1.0..=1.0));
        let y = DMatrix::from_element(200, 1, 0.7);
        let cfg = TrainConfig { epochs: 400, ..Default::default() };
        let (net, _) = jepa_mse_train(&x, &y, &cfg, &mut rng).unwrap();
        let g = grid_matrix(50);
        assert!(rmse(&net.predict(&g).unwrap(), |_| 0.7, &g) < 1e-2);
    }

    #[test]
    fn multi_branch_fit_collapses_to_the_conditional_mean() {
        let mut rng = seeded(111);
        let ds = gen_dataset_a(3000, 0.05, &mut rng);
        let (net, losses) = jepa_mse_train(&ds.contexts(), &ds.targets(), &TrainConfig::default(), &mut rng).unwrap();
        let g = grid_matrix(300);
        let pred = net.predict(&g).unwrap();
        let r = rmse(&pred, |v| v * v * v / 3.0, &g);
        assert!(r <= 0.08, "rmse {r}");
        assert!(rmse(&pred, |v| ds.kind.branch(0, v), &g) >= 0.3);
        assert!(rmse(&pred, |v| ds.kind.branch(1, v), &g) >= 0.3);
        // Even x³/3 itself is only (2/3)·sqrt(1/7) ≈ 0.25 from the cubic branch.
        assert!(rmse(&pred, |v| ds.kind.branch(2, v), &g) >= 0.2);
        let s = ema_smooth(&losses, 0.9);
        assert!(s.last().unwrap() < &s[10]);
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = seeded(3);
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
        let y = DMatrix::from_element(20, 1, f64::NAN);
        assert!(matches!(jepa_mse_train(&x, &y, &TrainConfig::default(), &mut rng), Err(Error::Diverged { epoch: 0 })));
    }

    #[test]
    fn mdn_loss_trends_down() {
        let mut rng = seeded(111);
        let ds = gen_dataset_a(600, 0.05, &mut rng);
        let cfg = MdnTrainConfig { epochs: 300, ..Default::default() };
        let fit = mdn_train(&ds.contexts(), &ds.targets(), &cfg, &mut rng).unwrap();
        let s = ema_smooth(&fit.losses, 0.9);
        assert!(s[299] < s[50] && s[50] < s[5]);
    }

    #[test]
    fn smoothing_keeps_constants() {
        assert_eq!(ema_smooth(&[2.0; 5], 0.9), vec![2.0; 5]);
        assert!(ema_smooth(&[], 0.9).is_empty());
    }
}
