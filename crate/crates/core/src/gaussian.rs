//! Multivariate normal algebra: conditioning, marginals, likelihoods,
//! sampling and information measures.
//!
//! All logarithms are natural, so entropies, mutual information and KL
//! divergences are in nats. Divide by `ln 2` for bits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, factor_with_policy, symmetrize, SpdFactor};
use crate::rng::standard_normal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `N(mean, cov)` with a symmetric positive-definite covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRaw", into = "GaussianRaw")]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Gaussian {
    /// Validates dimensions, symmetry and positive definiteness. Small
    /// asymmetries are averaged away.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_symmetric(&cov)?;
        let cov = symmetrize(&cov);
        factor_with_policy(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: DVector::zeros(d), cov: DMatrix::identity(d, d) }
    }

    /// Constructor for blocks already known to be SPD.
    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov: symmetrize(&cov) }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn factor(&self) -> Result<SpdFactor> {
        factor_with_policy(&self.cov)
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(-mvn_nll(x, self)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GaussianRaw {
    mean: Vec<f64>,
    /// Row-major `d × d`.
    cov: Vec<f64>,
}

impl TryFrom<GaussianRaw> for Gaussian {
    type Error = Error;
    fn try_from(r: GaussianRaw) -> Result<Self> {
        let d = r.mean.len();
        if r.cov.len() != d * d {
            return Err(Error::DimensionMismatch(format!("covariance has {} entries for dimension {d}", r.cov.len())));
        }
        Gaussian::new(DVector::from_vec(r.mean), DMatrix::from_row_slice(d, d, &r.cov))
    }
}

impl From<Gaussian> for GaussianRaw {
    fn from(g: Gaussian) -> Self {
        GaussianRaw { mean: g.mean.as_slice().to_vec(), cov: row_major(&g.cov) }
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Which half of a joint vector `[z_c, z_t]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Context,
    Target,
}

/// Gaussian over `[z_c, z_t]` stored as context/target blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRaw", into = "JointRaw")]
pub struct JointGaussian {
    pub mean_c: DVector<f64>,
    pub mean_t: DVector<f64>,
    pub cov_cc: DMatrix<f64>,
    pub cov_ct: DMatrix<f64>,
    pub cov_tc: DMatrix<f64>,
    pub cov_tt: DMatrix<f64>,
}

impl JointGaussian {
    pub fn new(
        mean_c: DVector<f64>,
        mean_t: DVector<f64>,
        cov_cc: DMatrix<f64>,
        cov_ct: DMatrix<f64>,
        cov_tc: DMatrix<f64>,
        cov_tt: DMatrix<f64>,
    ) -> Result<Self> {
        let (dc, dt) = (mean_c.len(), mean_t.len());
        let shapes = [
            (cov_cc.shape(), (dc, dc), "cov_cc"),
            (cov_ct.shape(), (dc, dt), "cov_ct"),
            (cov_tc.shape(), (dt, dc), "cov_tc"),
            (cov_tt.shape(), (dt, dt), "cov_tt"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(Error::DimensionMismatch(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        let joint = Self { mean_c, mean_t, cov_cc, cov_ct, cov_tc, cov_tt };
        let full = joint.full_cov();
        check_symmetric(&full)?;
        factor_with_policy(&full)?;
        Ok(joint.symmetrized())
    }

    /// Split a `(d_c + d_t)`-dimensional Gaussian after the first `d_c` coordinates.
    pub fn from_full(mean: &DVector<f64>, cov: &DMatrix<f64>, d_c: usize) -> Result<Self> {
        let d = mean.len();
        if d_c == 0 || d_c >= d || cov.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "cannot split dimension {d} (cov {:?}) at {d_c}",
                cov.shape()
            )));
        }
        let dt = d - d_c;
        Self::new(
            mean.rows(0, d_c).into_owned(),
            mean.rows(d_c, dt).into_owned(),
            cov.view((0, 0), (d_c, d_c)).into_owned(),
            cov.view((0, d_c), (d_c, dt)).into_owned(),
            cov.view((d_c, 0), (dt, d_c)).into_owned(),
            cov.view((d_c, d_c), (dt, dt)).into_owned(),
        )
    }

    fn symmetrized(mut self) -> Self {
        self.cov_cc = symmetrize(&self.cov_cc);
        self.cov_tt = symmetrize(&self.cov_tt);
        let ct = (&self.cov_ct + self.cov_tc.transpose()) * 0.5;
        self.cov_tc = ct.transpose();
        self.cov_ct = ct;
        self
    }

    pub fn d_c(&self) -> usize {
        self.mean_c.len()
    }

    pub fn d_t(&self) -> usize {
        self.mean_t.len()
    }

    pub fn dim(&self) -> usize {
        self.d_c() + self.d_t()
    }

    pub fn full_mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        m.rows_mut(0, self.d_c()).copy_from(&self.mean_c);
        m.rows_mut(self.d_c(), self.d_t()).copy_from(&self.mean_t);
        m
    }

    pub fn full_cov(&self) -> DMatrix<f64> {
        assemble(&self.cov_cc, &self.cov_ct, &self.cov_tc, &self.cov_tt)
    }

    pub fn as_gaussian(&self) -> Gaussian {
        Gaussian::from_parts(self.full_mean(), self.full_cov())
    }

    /// Precomputes the regression gain so that repeated conditioning costs a
    /// matrix-vector product.
    pub fn conditioner(&self) -> Result<Conditioner> {
        let f = factor_with_policy(&self.cov_cc)?;
        // X = Σ_cc⁻¹ Σ_ct, so the gain Σ_tc Σ_cc⁻¹ is Xᵀ.
        let x = f.solve(&self.cov_ct);
        let gain = x.transpose();
        let cov = symmetrize(&(&self.cov_tt - &self.cov_tc * &x));
        factor_with_policy(&cov)?;
        Ok(Conditioner { mean_c: self.mean_c.clone(), mean_t: self.mean_t.clone(), gain, cov })
    }
}

fn assemble(cc: &DMatrix<f64>, ct: &DMatrix<f64>, tc: &DMatrix<f64>, tt: &DMatrix<f64>) -> DMatrix<f64> {
    let (dc, dt) = (cc.nrows(), tt.nrows());
    let mut m = DMatrix::zeros(dc + dt, dc + dt);
    m.view_mut((0, 0), (dc, dc)).copy_from(cc);
    m.view_mut((0, dc), (dc, dt)).copy_from(ct);
    m.view_mut((dc, 0), (dt, dc)).copy_from(tc);
    m.view_mut((dc, dc), (dt, dt)).copy_from(tt);
    m
}

#[derive(Serialize, Deserialize)]
struct JointRaw {
    d_c: usize,
    d_t: usize,
    mean: Vec<f64>,
    /// Row-major `(d_c + d_t)²`.
    cov: Vec<f64>,
}

impl TryFrom<JointRaw> for JointGaussian {
    type Error = Error;
    fn try_from(r: JointRaw) -> Result<Self> {
        let d = r.d_c + r.d_t;
        if r.mean.len() != d || r.cov.len() != d * d {
            return Err(Error::DimensionMismatch("joint Gaussian arrays do not match d_c + d_t".into()));
        }
        JointGaussian::from_full(&DVector::from_vec(r.mean), &DMatrix::from_row_slice(d, d, &r.cov), r.d_c)
    }
}

impl From<JointGaussian> for JointRaw {
    fn from(j: JointGaussian) -> Self {
        JointRaw { d_c: j.d_c(), d_t: j.d_t(), mean: j.full_mean().as_slice().to_vec(), cov: row_major(&j.full_cov()) }
    }
}

/// Cached conditional `p(z_t | z_c)` of a joint Gaussian.
#[derive(Clone, Debug)]
pub struct Conditioner {
    mean_c: DVector<f64>,
    mean_t: DVector<f64>,
    gain: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl Conditioner {
    pub fn mean(&self, zc: &DVector<f64>) -> DVector<f64> {
        &self.mean_t + &self.gain * (zc - &self.mean_c)
    }

    /// Schur complement `Σ_tt − Σ_tc Σ_cc⁻¹ Σ_ct`, independent of `z_c`.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `Σ_tc Σ_cc⁻¹`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn at(&self, zc: &DVector<f64>) -> Gaussian {
        Gaussian::from_parts(self.mean(zc), self.cov.clone())
    }
}

/// `p(z_t | z_c = observed_zc)`.
pub fn condition(joint: &JointGaussian, observed_zc: &DVector<f64>) -> Result<Gaussian> {
    if observed_zc.len() != joint.d_c() {
        return Err(Error::DimensionMismatch(format!(
            "observed context has {} entries, joint expects {}",
            observed_zc.len(),
            joint.d_c()
        )));
    }
    Ok(joint.conditioner()?.at(observed_zc))
}

pub fn marginalize(joint: &JointGaussian, block: Block) -> Gaussian {
    match block {
        Block::Context => Gaussian::from_parts(joint.mean_c.clone(), joint.cov_cc.clone()),
        Block::Target => Gaussian::from_parts(joint.mean_t.clone(), joint.cov_tt.clone()),
    }
}

/// `½[log|Σ| + (x−μ)ᵀΣ⁻¹(x−μ) + d ln 2π]`.
pub fn mvn_nll(x: &DVector<f64>, g: &Gaussian) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch(format!("point has {} entries, Gaussian has {}", x.len(), g.dim())));
    }
    let f = g.factor()?;
    Ok(nll_with_factor(x, g.mean(), &f))
}

pub(crate) fn nll_with_factor(x: &DVector<f64>, mean: &DVector<f64>, f: &SpdFactor) -> f64 {
    let d = mean.len() as f64;
    0.5 * (f.logdet() + f.mahalanobis(&(x - mean)) + d * LN_2PI)
}

/// `n` draws as rows, each `μ + L ε`.
pub fn sample<R: Rng + ?Sized>(g: &Gaussian, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let f = g.factor()?;
    let l = f.l();
    let eps = standard_normal(rng, n, g.dim());
    let mut out = eps * l.transpose();
    for mut row in out.row_iter_mut() {
        row += g.mean.transpose();
    }
    Ok(out)
}

/// Differential entropy in nats.
pub fn entropy(g: &Gaussian) -> Result<f64> {
    let f = g.factor()?;
    let d = g.dim() as f64;
    Ok(0.5 * d * (1.0 + LN_2PI) + 0.5 * f.logdet())
}

/// `½ ln(|Σ_cc| |Σ_tt| / |Σ|)` in nats.
pub fn mutual_information(joint: &JointGaussian) -> Result<f64> {
    let cc = factor_with_policy(&joint.cov_cc)?;
    let tt = factor_with_policy(&joint.cov_tt)?;
    let full = factor_with_policy(&joint.full_cov())?;
    Ok(0.5 * (cc.logdet() + tt.logdet() - full.logdet()))
}

/// `KL(g0 ‖ g1)` in nats.
pub fn kl_divergence(g0: &Gaussian, g1: &Gaussian) -> Result<f64> {
    if g0.dim() != g1.dim() {
        return Err(Error::DimensionMismatch(format!("KL between dimensions {} and {}", g0.dim(), g1.dim())));
    }
    let f0 = g0.factor()?;
    let f1 = g1.factor()?;
    let tr = f1.solve(g0.cov()).trace();
    let maha = f1.mahalanobis(&(g1.mean() - g0.mean()));
    let d = g0.dim() as f64;
    Ok(0.5 * (tr + maha - d + f1.logdet() - f0.logdet()))
}

/// Blocks `Λ` of the joint precision matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionBlocks {
    pub lambda_cc: DMatrix<f64>,
    pub lambda_ct: DMatrix<f64>,
    pub lambda_tc: DMatrix<f64>,
    pub lambda_tt: DMatrix<f64>,
}

impl PrecisionBlocks {
    pub fn assemble(&self) -> DMatrix<f64> {
        assemble(&self.lambda_cc, &self.lambda_ct, &self.lambda_tc, &self.lambda_tt)
    }
}

/// Which Schur complement drives the block inversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchurForm {
    /// Complement of `Σ_cc`: `S = Σ_tt − Σ_tc Σ_cc⁻¹ Σ_ct`, so `Λ_tt = S⁻¹`.
    OfContext,
    /// Complement of `Σ_tt`: `P = Σ_cc − Σ_ct Σ_tt⁻¹ Σ_tc`, so `Λ_cc = P⁻¹`.
    OfTarget,
}

pub fn block_invert(joint: &JointGaussian) -> Result<PrecisionBlocks> {
    block_invert_with(joint, SchurForm::OfContext)
}

pub fn block_invert_with(joint: &JointGaussian, form: SchurForm) -> Result<PrecisionBlocks> {
    match form {
        SchurForm::OfContext => {
            let (a, b, c, d) = invert_2x2_blocks(&joint.cov_cc, &joint.cov_ct, &joint.cov_tc, &joint.cov_tt)?;
            Ok(PrecisionBlocks { lambda_cc: a, lambda_ct: b, lambda_tc: c, lambda_tt: d })
        }
        SchurForm::OfTarget => {
            // Same algebra with the roles of the blocks swapped.
            let (d, c, b, a) = invert_2x2_blocks(&joint.cov_tt, &joint.cov_tc, &joint.cov_ct, &joint.cov_cc)?;
            Ok(PrecisionBlocks { lambda_cc: a, lambda_ct: b, lambda_tc: c, lambda_tt: d })
        }
    }
}

/// Inverse of `[[A, B], [C, D]]` through the complement of `A`.
fn invert_2x2_blocks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let fa = factor_with_policy(a)?;
    let a_inv_b = fa.solve(b);
    let s = symmetrize(&(d - c * &a_inv_b));
    let fs = factor_with_policy(&s)?;
    let s_inv = fs.inverse();
    // C A⁻¹ = (A⁻¹ Cᵀ)ᵀ only for symmetric A, which holds for covariances.
    let c_a_inv = fa.solve(&c.transpose()).transpose();
    let lam_tt = s_inv.clone();
    let lam_tc = -(&s_inv * &c_a_inv);
    let lam_ct = -(&a_inv_b * &s_inv);
    let lam_cc = symmetrize(&(fa.inverse() + &a_inv_b * &s_inv * &c_a_inv));
    Ok((lam_cc, lam_ct, lam_tc, lam_tt))
}
