//! Single-Gaussian joint embeddings.
//!
//! The primal view works with the `d × d` feature covariance `C = ZᵀZ/N` of a
//! batch; the dual view works with the `N × N` Gram matrix of the context
//! rows and treats every target channel as a Gaussian process sharing that
//! kernel. Random Fourier features let the dual objective run in `O(N D²)`
//! without forming the Gram matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, JointGaussian};
use crate::linalg::{chol_logdet, factor_with_policy, symmetrize};

/// Upper bound on the number of random features accepted by [`rff_dual_nll`].
pub const RFF_MAX_FEATURES: usize = 8192;

/// A batch of `N` paired context and target embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEmbeddings {
    z_c: DMatrix<f64>,
    z_t: DMatrix<f64>,
}

impl BatchEmbeddings {
    pub fn new(z_c: DMatrix<f64>, z_t: DMatrix<f64>) -> Result<Self> {
        if z_c.nrows() != z_t.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} context rows vs {} target rows",
                z_c.nrows(),
                z_t.nrows()
            )));
        }
        if z_c.nrows() < 2 {
            return Err(Error::InvalidArgument("a batch needs at least two rows".into()));
        }
        if z_c.ncols() == 0 || z_t.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty embedding dimension".into()));
        }
        if z_c.iter().chain(z_t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embeddings must be finite".into()));
        }
        Ok(Self { z_c, z_t })
    }

    /// Split an `N × d` joint matrix after column `d_c`.
    pub fn from_joint(z: &DMatrix<f64>, d_c: usize) -> Result<Self> {
        if d_c == 0 || d_c >= z.ncols() {
            return Err(Error::DimensionMismatch(format!("cannot split {} columns at {d_c}", z.ncols())));
        }
        Self::new(z.columns(0, d_c).into_owned(), z.columns(d_c, z.ncols() - d_c).into_owned())
    }

    pub fn z_c(&self) -> &DMatrix<f64> {
        &self.z_c
    }

    pub fn z_t(&self) -> &DMatrix<f64> {
        &self.z_t
    }

    pub fn n(&self) -> usize {
        self.z_c.nrows()
    }

    pub fn d_c(&self) -> usize {
        self.z_c.ncols()
    }

    pub fn d_t(&self) -> usize {
        self.z_t.ncols()
    }

    pub fn d(&self) -> usize {
        self.d_c() + self.d_t()
    }

    /// `Z = [Z_c, Z_t]`, `N × d`.
    pub fn joint(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n(), self.d());
        z.columns_mut(0, self.d_c()).copy_from(&self.z_c);
        z.columns_mut(self.d_c(), self.d_t()).copy_from(&self.z_t);
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Kernel with an additive diagonal noise `σ²` used by the dual objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub length_scale: f64,
    pub noise: f64,
}

impl KernelSpec {
    pub fn linear(noise: f64) -> Self {
        Self { kind: KernelKind::Linear, length_scale: 1.0, noise }
    }

    pub fn rbf(length_scale: f64, noise: f64) -> Result<Self> {
        if !(length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!("RBF length scale must be positive, got {length_scale}")));
        }
        Ok(Self { kind: KernelKind::Rbf, length_scale, noise })
    }

    /// RBF kernel with the median pairwise distance as length scale.
    pub fn rbf_median(x: &DMatrix<f64>) -> Result<Self> {
        let mut dists = Vec::new();
        for i in 0..x.nrows() {
            for j in (i + 1)..x.nrows() {
                dists.push((x.row(i) - x.row(j)).norm());
            }
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        let med = dists.get(dists.len() / 2).copied().unwrap_or(1.0);
        Self::rbf(if med > 0.0 { med } else { 1.0 }, 0.0)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelKind::Rbf => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * sq / (self.length_scale * self.length_scale)).exp()
            }
        }
    }

    /// `K[i, j] = k(a_i, b_j)` over rows, without noise.
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self.kind {
            KernelKind::Linear => a * b.transpose(),
            KernelKind::Rbf => {
                let an: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
                let bn: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
                let mut g = a * b.transpose();
                let s = -0.5 / (self.length_scale * self.length_scale);
                for j in 0..g.ncols() {
                    for i in 0..g.nrows() {
                        let sq = (an[i] + bn[j] - 2.0 * g[(i, j)]).max(0.0);
                        g[(i, j)] = (s * sq).exp();
                    }
                }
                g
            }
        }
    }

    /// Noise-free Gram matrix over the rows of `x`.
    pub fn gram(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&self.cross(x, x))
    }
}

/// `C = ZᵀZ / N` over the joint batch, uncentered.
pub fn empirical_cov(batch: &BatchEmbeddings) -> DMatrix<f64> {
    let z = batch.joint();
    symmetrize(&(z.transpose() * &z)) / batch.n() as f64
}

/// Zero-mean joint Gaussian with covariance `ZᵀZ / N`. Positive
/// definiteness is not checked here; consumers factor with their own jitter.
pub fn empirical_joint_cov(batch: &BatchEmbeddings) -> JointGaussian {
    let c = empirical_cov(batch);
    let (dc, dt) = (batch.d_c(), batch.d_t());
    JointGaussian {
        mean_c: DVector::zeros(dc),
        mean_t: DVector::zeros(dt),
        cov_cc: c.view((0, 0), (dc, dc)).into_owned(),
        cov_ct: c.view((0, dc), (dc, dt)).into_owned(),
        cov_tc: c.view((dc, 0), (dt, dc)).into_owned(),
        cov_tt: c.view((dc, dc), (dt, dt)).into_owned(),
    }
}

fn with_jitter(c: &DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    let mut c = c.clone();
    for i in 0..c.nrows() {
        c[(i, i)] += jitter;
    }
    c
}

/// Joint NLL of the batch under its own empirical covariance, constants dropped:
/// `(1/2N) Σᵢ zᵢᵀ C⁻¹ zᵢ + ½ log|C|`.
pub fn primal_joint_nll(batch: &BatchEmbeddings, jitter: f64) -> Result<f64> {
    let c = empirical_cov(batch);
    let f = chol_logdet(&c, jitter)?;
    let z = batch.joint();
    // Tr(Z C⁻¹ Zᵀ) = Tr(C⁻¹ ZᵀZ) = N · Tr(C⁻¹ C_raw).
    let fit = f.solve(&(z.transpose() * &z)).trace() / (2.0 * batch.n() as f64);
    Ok(fit + 0.5 * f.logdet())
}

/// Data-fit term `(1/2N) Σᵢ zᵢᵀ C⁻¹ zᵢ` with `C` from the same batch and no
/// jitter. It is identically `d/2`, so it carries no gradient.
pub fn trace_trap_datafit(batch: &BatchEmbeddings) -> Result<f64> {
    let (n, d) = (batch.n(), batch.d());
    if n <= d {
        return Err(Error::RankDeficient(format!("N = {n} must exceed d = {d}")));
    }
    let c = empirical_cov(batch);
    let f = chol_logdet(&c, 0.0).map_err(|_| Error::RankDeficient("empirical covariance is singular".into()))?;
    let l = f.l();
    let diag: Vec<f64> = (0..d).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= hi * 1e-13 {
        return Err(Error::RankDeficient(format!("pivot ratio {:e}", lo / hi)));
    }
    let z = batch.joint();
    let y = l.solve_lower_triangular(&z.transpose()).expect("positive pivots");
    Ok(y.norm_squared() / (2.0 * n as f64))
}

/// `−½ log|C + jitter·I|`, the entropy-maximization regularizer.
pub fn entropy_max_loss(batch: &BatchEmbeddings, jitter: f64) -> Result<f64> {
    let f = factor_with_policy(&with_jitter(&empirical_cov(batch), jitter))?;
    Ok(-0.5 * f.logdet())
}

/// Gradient of [`entropy_max_loss`] with respect to the joint batch `Z`:
/// `−Z (C + jitter·I)⁻¹ / N`.
pub fn entropy_max_grad(batch: &BatchEmbeddings, jitter: f64) -> Result<DMatrix<f64>> {
    let f = factor_with_policy(&with_jitter(&empirical_cov(batch), jitter))?;
    let z = batch.joint();
    // Z C⁻¹ = (C⁻¹ Zᵀ)ᵀ since C is symmetric.
    Ok(-f.solve(&z.transpose()).transpose() / batch.n() as f64)
}

/// Linear projection predictor `N(C_tc C_cc⁻¹ z_c*, C_tt − C_tc C_cc⁻¹ C_ct)`
/// of a zero-mean joint.
pub fn primal_predict(cov: &JointGaussian, zc_star: &DVector<f64>) -> Result<Gaussian> {
    if zc_star.len() != cov.d_c() {
        return Err(Error::DimensionMismatch(format!("context has {} entries, expected {}", zc_star.len(), cov.d_c())));
    }
    let mut zero = cov.clone();
    zero.mean_c.fill(0.0);
    zero.mean_t.fill(0.0);
    Ok(zero.conditioner()?.at(zc_star))
}

/// `½ Tr(Z_tᵀ K⁻¹ Z_t) + w · log|K|` for an already-regularized Gram matrix.
pub fn dual_objective(k: &DMatrix<f64>, z_t: &DMatrix<f64>, logdet_weight: f64) -> Result<f64> {
    if k.nrows() != z_t.nrows() {
        return Err(Error::DimensionMismatch(format!("Gram is {}x{}, targets have {} rows", k.nrows(), k.ncols(), z_t.nrows())));
    }
    let f = chol_logdet(&symmetrize(k), 0.0)?;
    let fit = 0.5 * z_t.dot(&f.solve(z_t));
    Ok(fit + logdet_weight * f.logdet())
}

fn dual_gram(batch: &BatchEmbeddings, kernel: &KernelSpec, jitter: f64) -> DMatrix<f64> {
    with_jitter(&kernel.gram(batch.z_c()), kernel.noise + jitter)
}

/// Dual-GJE loss `½ Tr(Z_tᵀ K_cc⁻¹ Z_t) + (d_t/2) log|K_cc|`, with the kernel
/// noise and the jitter both added to the Gram diagonal.
pub fn dual_nll(batch: &BatchEmbeddings, kernel: &KernelSpec, jitter: f64) -> Result<f64> {
    let k = dual_gram(batch, kernel, jitter);
    dual_objective(&k, batch.z_t(), 0.5 * batch.d_t() as f64)
}

/// Gradient of [`dual_nll`] with respect to `Z_t`: `K_cc⁻¹ Z_t`.
///
/// Stepping against it shrinks every target channel towards zero, which is
/// why the dual loss collapses without a frozen target encoder.
pub fn dual_nll_grad_zt(batch: &BatchEmbeddings, kernel: &KernelSpec, jitter: f64) -> Result<DMatrix<f64>> {
    let f = chol_logdet(&dual_gram(batch, kernel, jitter), 0.0)?;
    Ok(f.solve(batch.z_t()))
}

/// Gaussian-process predictor at a new context. The scalar predictive
/// variance is shared by every target channel.
pub fn dual_predict(
    train: &BatchEmbeddings,
    kernel: &KernelSpec,
    zc_star: &DVector<f64>,
    jitter: f64,
) -> Result<Gaussian> {
    Ok(DualPredictor::fit(train, kernel, jitter)?.predict(zc_star))
}

/// Frozen dual model: the training contexts, `K⁻¹ Z_t` and the Gram factor.
#[derive(Clone, Debug)]
pub struct DualPredictor {
    kernel: KernelSpec,
    z_c: DMatrix<f64>,
    alpha: DMatrix<f64>,
    factor: crate::linalg::SpdFactor,
}

impl DualPredictor {
    pub fn fit(train: &BatchEmbeddings, kernel: &KernelSpec, jitter: f64) -> Result<Self> {
        let factor = chol_logdet(&dual_gram(train, kernel, jitter), 0.0)?;
        let alpha = factor.solve(train.z_t());
        Ok(Self { kernel: *kernel, z_c: train.z_c().clone(), alpha, factor })
    }

    /// Predictive mean (`d_t`) and the scalar latent variance.
    pub fn mean_var(&self, zc_star: &DVector<f64>) -> (DVector<f64>, f64) {
        let x = DMatrix::from_row_slice(1, zc_star.len(), zc_star.as_slice());
        let k_star = self.kernel.cross(&self.z_c, &x);
        let mean = (k_star.transpose() * &self.alpha).transpose().column(0).into_owned();
        let k_ss = self.kernel.eval(zc_star.as_slice(), zc_star.as_slice());
        let v = self.factor.solve(&k_star);
        let var = (k_ss - k_star.dot(&v)).max(0.0);
        (mean, var)
    }

    pub fn predict(&self, zc_star: &DVector<f64>) -> Gaussian {
        let (mean, var) = self.mean_var(zc_star);
        let d_t = mean.len();
        // Exact interpolation leaves a zero variance; keep the covariance
        // strictly positive so the result is a proper density.
        let var = var.max(1e-12);
        Gaussian::from_parts(mean, DMatrix::identity(d_t, d_t) * var)
    }
}

/// Linear-kernel primal–dual gap of the joint batch.
///
/// The dual side is `½ Tr(ZᵀK⁻¹Z) + ½ log|K|` with `K = ZZᵀ + εI_N`; the
/// primal side is `½(log|C| − ε Tr C⁻¹) + d/2 + ½(N−d) log ε` with
/// `C = ZᵀZ + εI_d`. Both use the full joint `Z` and unnormalized products.
pub fn primal_dual_residual(batch: &BatchEmbeddings, jitter: f64) -> Result<f64> {
    let (dual, primal) = primal_dual_sides(batch, jitter)?;
    Ok((dual - primal).abs())
}

/// The two sides compared by [`primal_dual_residual`].
pub fn primal_dual_sides(batch: &BatchEmbeddings, jitter: f64) -> Result<(f64, f64)> {
    if !(jitter > 0.0) {
        return Err(Error::InvalidArgument("the primal-dual identity needs a positive jitter".into()));
    }
    let z = batch.joint();
    let (n, d) = (z.nrows() as f64, z.ncols() as f64);
    let k = with_jitter(&KernelSpec::linear(0.0).gram(&z), jitter);
    let dual = dual_objective(&k, &z, 0.5)?;
    let c = with_jitter(&symmetrize(&(z.transpose() * &z)), jitter);
    let f = chol_logdet(&c, 0.0)?;
    let primal = 0.5 * (f.logdet() - jitter * f.inverse().trace()) + 0.5 * d + 0.5 * (n - d) * jitter.ln();
    Ok((dual, primal))
}

/// Random Fourier feature map for the RBF kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffProjection {
    /// `d_c × D`, columns drawn from `N(0, ℓ⁻² I)`.
    pub frequencies: DMatrix<f64>,
    /// `D` phases on `[0, 2π)`.
    pub phases: DVector<f64>,
    pub bandwidth: f64,
}

impl RffProjection {
    pub fn sample<R: Rng + ?Sized>(d_c: usize, features: usize, length_scale: f64, rng: &mut R) -> Result<Self> {
        if features == 0 {
            return Err(Error::InvalidArgument("need at least one random feature".into()));
        }
        if !(length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!("length scale must be positive, got {length_scale}")));
        }
        let normal = Normal::new(0.0, 1.0 / length_scale).expect("positive scale");
        let uniform = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
        let mut frequencies = DMatrix::zeros(d_c, features);
        for j in 0..features {
            for i in 0..d_c {
                frequencies[(i, j)] = normal.sample(rng);
            }
        }
        let phases = DVector::from_fn(features, |_, _| uniform.sample(rng));
        Ok(Self { frequencies, phases, bandwidth: length_scale })
    }

    pub fn feature_count(&self) -> usize {
        self.phases.len()
    }
}

/// `Ψ = √(2/D) cos(Z_c Ω + b)`, so `ψ(x)ᵀψ(y) ≈ k_rbf(x, y)`.
pub fn rff_features(z_c: &DMatrix<f64>, proj: &RffProjection) -> Result<DMatrix<f64>> {
    if z_c.ncols() != proj.frequencies.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "inputs have {} columns, projection expects {}",
            z_c.ncols(),
            proj.frequencies.nrows()
        )));
    }
    let dd = proj.feature_count();
    let scale = (2.0 / dd as f64).sqrt();
    let mut psi = z_c * &proj.frequencies;
    for j in 0..dd {
        let b = proj.phases[j];
        for v in psi.column_mut(j).iter_mut() {
            *v = scale * (*v + b).cos();
        }
    }
    Ok(psi)
}

/// Dual loss with `K = ΨΨᵀ + εI_N`, evaluated through the `D × D` matrix
/// `C = ΨᵀΨ + εI_D` only:
///
/// - `Tr(Z_tᵀK⁻¹Z_t) = ε⁻¹[Tr(Z_tᵀZ_t) − Tr((ΨᵀZ_t)ᵀ C⁻¹ (ΨᵀZ_t))]`
/// - `log|K| = log|C| + (N − D) log ε`
pub fn rff_dual_nll(features: &DMatrix<f64>, z_t: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    let (n, dd) = features.shape();
    if z_t.nrows() != n {
        return Err(Error::DimensionMismatch(format!("{n} feature rows vs {} target rows", z_t.nrows())));
    }
    if dd > RFF_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!("{dd} features exceed the cap of {RFF_MAX_FEATURES}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = with_jitter(&symmetrize(&features.tr_mul(features)), epsilon);
    let f = chol_logdet(&c, 0.0)?;
    let pz = features.tr_mul(z_t);
    let fit = (z_t.norm_squared() - pz.dot(&f.solve(&pz))) / epsilon;
    let logdet_k = f.logdet() + (n as f64 - dd as f64) * epsilon.ln();
    Ok(0.5 * fit + 0.5 * z_t.ncols() as f64 * logdet_k)
}

/// Empirical HSIC `Tr(K_c H K_t H) / (N−1)²`. Kernel noise is ignored.
pub fn hsic(z_c: &DMatrix<f64>, z_t: &DMatrix<f64>, kernel_c: &KernelSpec, kernel_t: &KernelSpec) -> Result<f64> {
    let n = z_c.nrows();
    if n != z_t.nrows() {
        return Err(Error::DimensionMismatch(format!("{n} context rows vs {} target rows", z_t.nrows())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("HSIC needs at least two rows".into()));
    }
    let kc = center(&kernel_c.gram(z_c));
    let kt = kernel_t.gram(z_t);
    // Tr(K_c H K_t H) = Tr((H K_c H) K_t) because H is idempotent; both are symmetric.
    Ok(kc.dot(&kt) / ((n - 1) * (n - 1)) as f64)
}

/// `H K H` with `H = I − 11ᵀ/N`.
fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows() as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / n).collect();
    let col_means: Vec<f64> = k.column_iter().map(|c| c.sum() / n).collect();
    let grand = row_means.iter().sum::<f64>() / n;
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// `θ' ← m θ' + (1 − m) θ` for a slow-moving target encoder.
pub fn ema_target_update(target: &mut [f64], online: &[f64], momentum: f64) {
    for (t, o) in target.iter_mut().zip(online) {
        *t = momentum * *t + (1.0 - momentum) * o;
    }
}

/// Momentum for the EMA target encoder.
pub const DEFAULT_TARGET_MOMENTUM: f64 = 0.99;
