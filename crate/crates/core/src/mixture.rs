//! Joint Gaussian mixtures over `[z_c, z_t]`.
//!
//! Conditioning a joint mixture on `z_c` gives another mixture whose weights
//! are the context responsibilities `γ_k(z_c)` and whose components are the
//! per-component Gaussian conditionals. Everything that touches mixture
//! weights is done in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{marginalize, nll_with_factor, Block, Conditioner, Gaussian, JointGaussian, LN_2PI};
use crate::linalg::{chol_logdet, factor_with_policy, logsumexp, symmetrize, SpdFactor};
use crate::rng::standard_normal;

const SIMPLEX_TOL: f64 = 1e-10;

/// `p(z) = Σ_k π_k N(z | μ_k, Σ_k)` over joint vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRaw", into = "MixtureRaw")]
pub struct JointMixture {
    weights: DVector<f64>,
    components: Vec<JointGaussian>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRaw {
    weights: Vec<f64>,
    components: Vec<JointGaussian>,
}

impl TryFrom<MixtureRaw> for JointMixture {
    type Error = Error;
    fn try_from(r: MixtureRaw) -> Result<Self> {
        JointMixture::new(DVector::from_vec(r.weights), r.components)
    }
}

impl From<JointMixture> for MixtureRaw {
    fn from(m: JointMixture) -> Self {
        MixtureRaw { weights: m.weights.as_slice().to_vec(), components: m.components }
    }
}

pub(crate) fn check_simplex(w: &DVector<f64>) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidArgument("empty weight vector".into()));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let s = w.sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

impl JointMixture {
    pub fn new(weights: DVector<f64>, components: Vec<JointGaussian>) -> Result<Self> {
        check_simplex(&weights)?;
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let (dc, dt) = (components[0].d_c(), components[0].d_t());
        if components.iter().any(|c| c.d_c() != dc || c.d_t() != dt) {
            return Err(Error::DimensionMismatch("components disagree on (d_c, d_t)".into()));
        }
        Ok(Self { weights, components })
    }

    /// Equal-weight mixture with isotropic covariance `τI` centred on the
    /// rows of the two banks: the kernel density estimate of the joint.
    pub fn kde(bank_c: &DMatrix<f64>, bank_t: &DMatrix<f64>, tau: f64) -> Result<Self> {
        if bank_c.nrows() != bank_t.nrows() || bank_c.nrows() == 0 {
            return Err(Error::DimensionMismatch("KDE banks must have the same nonzero row count".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {tau}")));
        }
        let (m, dc, dt) = (bank_c.nrows(), bank_c.ncols(), bank_t.ncols());
        let components = (0..m)
            .map(|i| JointGaussian {
                mean_c: bank_c.row(i).transpose(),
                mean_t: bank_t.row(i).transpose(),
                cov_cc: DMatrix::identity(dc, dc) * tau,
                cov_ct: DMatrix::zeros(dc, dt),
                cov_tc: DMatrix::zeros(dt, dc),
                cov_tt: DMatrix::identity(dt, dt) * tau,
            })
            .collect();
        Self::new(DVector::from_element(m, 1.0 / m as f64), components)
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn components(&self) -> &[JointGaussian] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn d_c(&self) -> usize {
        self.components[0].d_c()
    }

    pub fn d_t(&self) -> usize {
        self.components[0].d_t()
    }

    /// `log p(z)` for a joint vector.
    pub fn log_pdf(&self, z: &DVector<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.k());
        for (w, c) in self.weights.iter().zip(&self.components) {
            let f = factor_with_policy(&c.full_cov())?;
            terms.push(w.ln() - nll_with_factor(z, &c.full_mean(), &f));
        }
        Ok(logsumexp(&terms))
    }

    /// Draws from the joint, or from one block's marginal.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        block: Option<Block>,
        weights: SamplingWeights,
        rng: &mut R,
    ) -> Result<Labeled> {
        let comps: Vec<Gaussian> = match block {
            None => self.components.iter().map(|c| c.as_gaussian()).collect(),
            Some(b) => self.components.iter().map(|c| marginalize(c, b)).collect(),
        };
        let w = match weights {
            SamplingWeights::Learned => self.weights.clone(),
            SamplingWeights::Uniform => DVector::from_element(self.k(), 1.0 / self.k() as f64),
        };
        sample_mixture_labeled(&w, &comps, n, rng)
    }
}

/// Which mixing proportions generative sampling uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingWeights {
    #[default]
    Learned,
    Uniform,
}

/// `p(z_t | z_c) = Σ_k γ_k(z_c) N(z_t | μ_{t|c,k}, Σ_{t|c,k})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMixture {
    pub responsibilities: DVector<f64>,
    pub cond_means: Vec<DVector<f64>>,
    pub cond_covs: Vec<DMatrix<f64>>,
}

impl ConditionalMixture {
    pub fn k(&self) -> usize {
        self.cond_means.len()
    }

    pub fn log_pdf(&self, zt: &DVector<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.k());
        for k in 0..self.k() {
            let f = factor_with_policy(&self.cond_covs[k])?;
            terms.push(self.responsibilities[k].ln() - nll_with_factor(zt, &self.cond_means[k], &f));
        }
        Ok(logsumexp(&terms))
    }

    /// Index of the component with the largest responsibility.
    pub fn dominant(&self) -> usize {
        self.responsibilities.argmax().0
    }
}

/// Conditioners for every component plus the context factors, so that many
/// contexts can be processed against one mixture cheaply.
#[derive(Clone, Debug)]
pub struct MixtureConditioner {
    log_weights: Vec<f64>,
    context: Vec<(DVector<f64>, SpdFactor)>,
    conditioners: Vec<Conditioner>,
}

impl MixtureConditioner {
    pub fn new(mix: &JointMixture) -> Result<Self> {
        let mut context = Vec::with_capacity(mix.k());
        let mut conditioners = Vec::with_capacity(mix.k());
        for c in mix.components() {
            context.push((c.mean_c.clone(), factor_with_policy(&c.cov_cc)?));
            conditioners.push(c.conditioner()?);
        }
        Ok(Self { log_weights: mix.weights.iter().map(|w| w.ln()).collect(), context, conditioners })
    }

    /// Context responsibilities `γ_k(z_c)`, normalized in log space.
    pub fn responsibilities(&self, zc: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.context[0].0.len();
        if zc.len() != d {
            return Err(Error::DimensionMismatch(format!("context has {} entries, mixture expects {d}", zc.len())));
        }
        let logs: Vec<f64> = self
            .context
            .iter()
            .zip(&self.log_weights)
            .map(|((m, f), lw)| lw - nll_with_factor(zc, m, f))
            .collect();
        let norm = logsumexp(&logs);
        if !norm.is_finite() {
            return Err(Error::AllZeroLikelihood);
        }
        Ok(DVector::from_iterator(logs.len(), logs.iter().map(|l| (l - norm).exp())))
    }

    pub fn condition(&self, zc: &DVector<f64>) -> Result<ConditionalMixture> {
        let responsibilities = self.responsibilities(zc)?;
        Ok(ConditionalMixture {
            responsibilities,
            cond_means: self.conditioners.iter().map(|c| c.mean(zc)).collect(),
            cond_covs: self.conditioners.iter().map(|c| c.cov().clone()).collect(),
        })
    }
}

pub fn conditional_mixture(mix: &JointMixture, zc: &DVector<f64>) -> Result<ConditionalMixture> {
    MixtureConditioner::new(mix)?.condition(zc)
}

/// The same weights with each component's marginal over `block`.
pub fn marginal_mixture(mix: &JointMixture, block: Block) -> (DVector<f64>, Vec<Gaussian>) {
    (mix.weights.clone(), mix.components.iter().map(|c| marginalize(c, block)).collect())
}

/// `log Σ_k π_k N(x | μ_k, Σ_k)` for a list of Gaussians.
pub fn mixture_log_pdf(weights: &DVector<f64>, comps: &[Gaussian], x: &DVector<f64>) -> Result<f64> {
    let mut terms = Vec::with_capacity(comps.len());
    for (w, g) in weights.iter().zip(comps) {
        terms.push(w.ln() - nll_with_factor(x, g.mean(), &g.factor()?));
    }
    Ok(logsumexp(&terms))
}

/// Learnable prototypes with softmax-normalized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    /// `K × D` joint means, one per row.
    pub prototypes: DMatrix<f64>,
    pub covs: PrototypeCovs,
    pub log_weights: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeCovs {
    Shared(DMatrix<f64>),
    PerComponent(Vec<DMatrix<f64>>),
}

impl PrototypeSet {
    pub fn k(&self) -> usize {
        self.prototypes.nrows()
    }

    /// `log softmax(log_weights)`.
    pub fn log_pi(&self) -> Vec<f64> {
        let lse = logsumexp(self.log_weights.as_slice());
        self.log_weights.iter().map(|w| w - lse).collect()
    }

    fn check(&self, z: &DVector<f64>) -> Result<()> {
        if self.log_weights.len() != self.k() || self.k() == 0 {
            return Err(Error::DimensionMismatch("one log-weight per prototype required".into()));
        }
        if z.len() != self.prototypes.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, prototypes have {}",
                z.len(),
                self.prototypes.ncols()
            )));
        }
        Ok(())
    }
}

/// `−log Σ_k exp(a_k)` written as `−c − log Σ_k exp(a_k − c)`, `c = max a_k`.
fn neg_lse_shifted(a: &[f64]) -> f64 {
    let c = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    -c - a.iter().map(|v| (v - c).exp()).sum::<f64>().ln()
}

/// Shared-covariance prototype loss with the `2π` constant dropped:
/// `½ log|Σ| − c(Z) − log Σ_k exp(log π_k − ½ M_k − c(Z))`.
pub fn proto_nll_shared(z_joint: &DVector<f64>, protos: &PrototypeSet) -> Result<f64> {
    protos.check(z_joint)?;
    let cov = match &protos.covs {
        PrototypeCovs::Shared(c) => c,
        PrototypeCovs::PerComponent(_) => {
            return Err(Error::InvalidArgument("shared loss needs a shared covariance".into()))
        }
    };
    let f = chol_logdet(&symmetrize(cov), 0.0)?;
    let log_pi = protos.log_pi();
    let a: Vec<f64> = (0..protos.k())
        .map(|k| log_pi[k] - 0.5 * f.mahalanobis(&(z_joint - protos.prototypes.row(k).transpose())))
        .collect();
    Ok(0.5 * f.logdet() + neg_lse_shifted(&a))
}

/// General prototype loss with per-component covariances:
/// `−c(Z) − log Σ_k exp(log π_k − ½ M_k − ½ log|Σ_k| − c(Z))`.
pub fn proto_nll_full(z_joint: &DVector<f64>, protos: &PrototypeSet) -> Result<f64> {
    protos.check(z_joint)?;
    let log_pi = protos.log_pi();
    let factors: Vec<SpdFactor> = match &protos.covs {
        PrototypeCovs::Shared(c) => {
            let f = chol_logdet(&symmetrize(c), 0.0)?;
            vec![f; protos.k()]
        }
        PrototypeCovs::PerComponent(cs) => {
            if cs.len() != protos.k() {
                return Err(Error::DimensionMismatch("one covariance per prototype required".into()));
            }
            cs.iter().map(|c| chol_logdet(&symmetrize(c), 0.0)).collect::<Result<_>>()?
        }
    };
    let a: Vec<f64> = (0..protos.k())
        .map(|k| {
            let r = z_joint - protos.prototypes.row(k).transpose();
            log_pi[k] - 0.5 * factors[k].mahalanobis(&r) - 0.5 * factors[k].logdet()
        })
        .collect();
    Ok(neg_lse_shifted(&a))
}

/// Settings for [`em_fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmOptions {
    pub k: usize,
    pub max_iters: usize,
    /// Relative change in mean log-likelihood that counts as converged.
    pub tol: f64,
    /// Lower bound on covariance diagonal entries.
    pub var_floor: f64,
    pub kmeans_iters: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { k: 3, max_iters: 200, tol: 1e-7, var_floor: 1e-6, kmeans_iters: 300 }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub mixture: JointMixture,
    /// Mean per-sample log-likelihood at every E-step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Full-covariance EM on joint rows, initialized from k-means++ / Lloyd.
pub fn em_fit<R: Rng + ?Sized>(data: &DMatrix<f64>, d_c: usize, opts: &EmOptions, rng: &mut R) -> Result<EmFit> {
    let (n, d) = data.shape();
    let k = opts.k;
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= N, got k = {k}, N = {n}")));
    }
    if d_c == 0 || d_c >= d {
        return Err(Error::DimensionMismatch(format!("cannot split {d} columns at {d_c}")));
    }
    let labels = kmeans(data, k, opts.kmeans_iters, rng).labels;
    let mut resp = DMatrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let mut params = m_step(data, &resp, opts.var_floor)?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let (ll, r) = e_step(data, &params)?;
        iterations += 1;
        if let Some(&prev) = history.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= opts.tol * prev.abs().max(1.0) {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        resp = r;
        params = m_step(data, &resp, opts.var_floor)?;
    }
    let components = params
        .means
        .iter()
        .zip(&params.covs)
        .map(|(m, c)| JointGaussian::from_full(m, c, d_c))
        .collect::<Result<Vec<_>>>()?;
    let mixture = JointMixture::new(params.weights, components)?;
    Ok(EmFit { mixture, log_likelihood: history, iterations, converged })
}

struct EmParams {
    weights: DVector<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

fn m_step(data: &DMatrix<f64>, resp: &DMatrix<f64>, var_floor: f64) -> Result<EmParams> {
    let (n, d) = data.shape();
    let k = resp.ncols();
    let mut weights = DVector::zeros(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let r = resp.column(j);
        let nk: f64 = r.sum();
        if nk <= 1e-10 * n as f64 {
            return Err(Error::DegenerateComponent { component: j });
        }
        let mean = data.tr_mul(&r) / nk;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            if r[i] == 0.0 {
                continue;
            }
            let x = data.row(i).transpose() - &mean;
            cov.ger(r[i], &x, &x, 1.0);
        }
        cov /= nk;
        let mut cov = symmetrize(&cov);
        for a in 0..d {
            if cov[(a, a)] < var_floor {
                cov[(a, a)] = var_floor;
            }
        }
        if chol_logdet(&cov, 0.0).is_err() {
            return Err(Error::DegenerateComponent { component: j });
        }
        weights[j] = nk / n as f64;
        means.push(mean);
        covs.push(cov);
    }
    let s = weights.sum();
    weights /= s;
    Ok(EmParams { weights, means, covs })
}

/// Mean log-likelihood and responsibilities.
fn e_step(data: &DMatrix<f64>, p: &EmParams) -> Result<(f64, DMatrix<f64>)> {
    let n = data.nrows();
    let k = p.weights.len();
    let d = data.ncols() as f64;
    let mut logp = DMatrix::zeros(n, k);
    for j in 0..k {
        let f = chol_logdet(&p.covs[j], 0.0).map_err(|_| Error::DegenerateComponent { component: j })?;
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= p.means[j].transpose();
        }
        let maha = f.mahalanobis_rows(&centered);
        let c = p.weights[j].ln() - 0.5 * (f.logdet() + d * LN_2PI);
        for i in 0..n {
            logp[(i, j)] = c - 0.5 * maha[i];
        }
    }
    let mut total = 0.0;
    let mut resp = DMatrix::zeros(n, k);
    let mut row = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            row[j] = logp[(i, j)];
        }
        let norm = logsumexp(&row);
        total += norm;
        for j in 0..k {
            resp[(i, j)] = (row[j] - norm).exp();
        }
    }
    Ok((total / n as f64, resp))
}

/// Output of [`kmeans`].
#[derive(Clone, Debug)]
pub struct KMeans {
    pub centers: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, max_iters: usize, rng: &mut R) -> KMeans {
    let (n, d) = data.shape();
    let sq = |i: usize, c: &DMatrix<f64>, j: usize| -> f64 {
        (0..d).map(|a| (data[(i, a)] - c[(j, a)]).powi(2)).sum()
    };
    let mut centers = DMatrix::zeros(k, d);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from(&data.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq(i, &centers, 0)).collect();
    for j in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in closest.iter().enumerate() {
                acc += w;
                if acc > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(j).copy_from(&data.row(pick));
        for i in 0..n {
            closest[i] = closest[i].min(sq(i, &centers, j));
        }
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let best = (0..k)
                .map(|j| (j, sq(i, &centers, j)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                .0;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut r = sums.row_mut(labels[i]);
            r += data.row(i);
            counts[labels[i]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let row = sums.row(j) / counts[j] as f64;
                centers.row_mut(j).copy_from(&row);
            }
        }
    }
    let inertia = (0..n).map(|i| sq(i, &centers, labels[i])).sum();
    KMeans { centers, labels, inertia }
}

/// Law of total variance: `μ = Σ γ_k μ_k`, `Σ = Σ γ_k Σ_k + Σ γ_k (μ_k − μ)(μ_k − μ)ᵀ`.
pub fn total_variance(cm: &ConditionalMixture) -> (DVector<f64>, DMatrix<f64>) {
    let (within, between) = total_variance_parts(cm);
    let mean = cm.cond_means.iter().zip(cm.responsibilities.iter()).map(|(m, g)| m * *g).sum::<DVector<f64>>();
    (mean, within + between)
}

/// The local-noise and the ambiguity parts of [`total_variance`].
pub fn total_variance_parts(cm: &ConditionalMixture) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = cm.cond_means[0].len();
    let mut mean = DVector::zeros(d);
    for (m, g) in cm.cond_means.iter().zip(cm.responsibilities.iter()) {
        mean += m * *g;
    }
    let mut within = DMatrix::zeros(d, d);
    let mut between = DMatrix::zeros(d, d);
    for k in 0..cm.k() {
        let g = cm.responsibilities[k];
        within += &cm.cond_covs[k] * g;
        let r = &cm.cond_means[k] - &mean;
        between.ger(g, &r, &r, 1.0);
    }
    (symmetrize(&within), symmetrize(&between))
}

/// Samples with the index of the component that produced each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub samples: DMatrix<f64>,
    pub labels: Vec<usize>,
}

/// Two-step sampling: a categorical draw on `π`, then `μ_k + L_k ε`.
pub fn sample_mixture<R: Rng + ?Sized>(
    weights: &DVector<f64>,
    components: &[Gaussian],
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    Ok(sample_mixture_labeled(weights, components, n, rng)?.samples)
}

pub fn sample_mixture_labeled<R: Rng + ?Sized>(
    weights: &DVector<f64>,
    components: &[Gaussian],
    n: usize,
    rng: &mut R,
) -> Result<Labeled> {
    check_simplex(weights)?;
    if weights.len() != components.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} components", weights.len(), components.len())));
    }
    let d = components[0].dim();
    let factors = components.iter().map(|g| g.factor()).collect::<Result<Vec<_>>>()?;
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights.iter() {
        acc += w;
        cdf.push(acc);
    }
    let mut samples = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cdf.iter().position(|&c| c > u).unwrap_or_else(|| last_positive(weights));
        let eps = standard_normal(rng, d, 1).column(0).into_owned();
        let x = components[k].mean() + factors[k].l_mul(&eps);
        samples.row_mut(i).copy_from(&x.transpose());
        labels.push(k);
    }
    Ok(Labeled { samples, labels })
}

fn last_positive(w: &DVector<f64>) -> usize {
    (0..w.len()).rev().find(|&k| w[k] > 0.0).unwrap_or(0)
}

fn check_unit(v: &[f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// InfoNCE over a bank of normalized targets:
/// `−log[exp(z_cᵀz_t/τ) / Σ_m exp(z_cᵀz_t^(m)/τ)]`.
///
/// Up to an additive constant this is the conditional NLL of an equal-weight
/// isotropic KDE whose context and target anchors coincide.
pub fn dam_conditional_nll(zc: &DVector<f64>, zt: &DVector<f64>, bank: &DMatrix<f64>, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    if zc.len() != zt.len() || bank.ncols() != zc.len() || bank.nrows() == 0 {
        return Err(Error::DimensionMismatch("context, target and bank widths must agree".into()));
    }
    check_unit(zc.as_slice())?;
    check_unit(zt.as_slice())?;
    for row in bank.row_iter() {
        check_unit(&row.iter().copied().collect::<Vec<_>>())?;
    }
    let logits: Vec<f64> = (bank * zc).iter().map(|s| s / tau).collect();
    Ok(logsumexp(&logits) - zc.dot(zt) / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{condition, mvn_nll};
    use crate::rng::{seeded, GjeRng};
    use crate::test_util::{random_joint, random_spd};

    fn random_mixture(rng: &mut GjeRng, k: usize, dc: usize, dt: usize) -> JointMixture {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.2).collect();
        let s: f64 = raw.iter().sum();
        let comps = (0..k)
            .map(|_| {
                let mut j = random_joint(rng, dc, dt);
                j.mean_c *= 2.0;
                j.mean_t *= 2.0;
                j
            })
            .collect();
        JointMixture::new(DVector::from_iterator(k, raw.iter().map(|r| r / s)), comps).unwrap()
    }

    /// Dense joint density by explicit inverse and determinant.
    fn dense_log_pdf(w: &[f64], means: &[DVector<f64>], covs: &[DMatrix<f64>], x: &DVector<f64>) -> f64 {
        let d = x.len() as f64;
        let mut acc = 0.0;
        for k in 0..w.len() {
            let r = x - &means[k];
            let inv = covs[k].clone().try_inverse().unwrap();
            let q = (r.transpose() * inv * &r)[(0, 0)];
            acc += w[k] * (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(d / 2.0) * covs[k].determinant().sqrt());
        }
        acc.ln()
    }

    #[test]
    fn single_component_condition_matches_gaussian() {
        let mut rng = seeded(1);
        let j = random_joint(&mut rng, 2, 2);
        let mix = JointMixture::new(DVector::from_element(1, 1.0), vec![j.clone()]).unwrap();
        let zc = DVector::from_vec(vec![0.4, -0.3]);
        let cm = conditional_mixture(&mix, &zc).unwrap();
        assert_eq!(cm.responsibilities[0], 1.0);
        let g = condition(&j, &zc).unwrap();
        assert!((&cm.cond_means[0] - g.mean()).amax() < 1e-14);
        assert!((&cm.cond_covs[0] - g.cov()).amax() < 1e-14);
    }

    #[test]
    fn identical_context_marginals_route_by_prior() {
        let mut rng = seeded(2);
        let base = random_joint(&mut rng, 2, 1);
        let mut other = base.clone();
        other.mean_t[0] += 3.0;
        other.cov_ct *= 0.5;
        other.cov_tc *= 0.5;
        let mix = JointMixture::new(DVector::from_vec(vec![0.3, 0.7]), vec![base, other]).unwrap();
        for t in [-3.0, 0.0, 2.5] {
            let cm = conditional_mixture(&mix, &DVector::from_element(2, t)).unwrap();
            assert!((cm.responsibilities[0] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_mixture_is_the_density_ratio() {
        let mut rng = seeded(3);
        let mix = random_mixture(&mut rng, 3, 2, 2);
        let (w, cmarg) = marginal_mixture(&mix, Block::Context);
        for _ in 0..100 {
            let z = standard_normal(&mut rng, 4, 1).column(0).into_owned() * 2.0;
            let zc = z.rows(0, 2).into_owned();
            let zt = z.rows(2, 2).into_owned();
            let ratio = mix.log_pdf(&z).unwrap() - mixture_log_pdf(&w, &cmarg, &zc).unwrap();
            let cond = conditional_mixture(&mix, &zc).unwrap().log_pdf(&zt).unwrap();
            assert!((ratio - cond).abs() < 1e-10);
        }
    }

    #[test]
    fn far_contexts_stay_finite() {
        let mut rng = seeded(4);
        let mix = random_mixture(&mut rng, 3, 1, 1);
        let cm = conditional_mixture(&mix, &DVector::from_element(1, 1e3)).unwrap();
        assert!((cm.responsibilities.sum() - 1.0).abs() < 1e-12);
        assert!(cm.responsibilities.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn underflow_everywhere_is_reported() {
        let j = JointGaussian::from_full(&DVector::zeros(2), &DMatrix::identity(2, 2), 1).unwrap();
        let mix = JointMixture::new(DVector::from_element(1, 1.0), vec![j]).unwrap();
        let r = conditional_mixture(&mix, &DVector::from_element(1, 1e200));
        assert!(matches!(r, Err(Error::AllZeroLikelihood)));
    }

    #[test]
    fn marginal_examples() {
        let mut rng = seeded(5);
        let j = random_joint(&mut rng, 1, 2);
        let mix = JointMixture::new(DVector::from_element(1, 1.0), vec![j.clone()]).unwrap();
        let (w, g) = marginal_mixture(&mix, Block::Target);
        assert_eq!(w[0], 1.0);
        assert_eq!(g[0], marginalize(&j, Block::Target));

        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let a = JointGaussian::from_full(&DVector::from_vec(vec![0.0, 2.0]), &cov, 1).unwrap();
        let b = JointGaussian::from_full(&DVector::from_vec(vec![0.0, -2.0]), &cov, 1).unwrap();
        let mix = JointMixture::new(DVector::from_vec(vec![0.5, 0.5]), vec![a, b]).unwrap();
        let (w, g) = marginal_mixture(&mix, Block::Target);
        for t in [0.3, 1.0, 2.7] {
            let p = mixture_log_pdf(&w, &g, &DVector::from_element(1, t)).unwrap();
            let q = mixture_log_pdf(&w, &g, &DVector::from_element(1, -t)).unwrap();
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn marginal_matches_quadrature() {
        let mut rng = seeded(6);
        let mix = random_mixture(&mut rng, 3, 1, 1);
        let (w, g) = marginal_mixture(&mix, Block::Target);
        let n = 6000;
        let (lo, hi) = (-25.0, 25.0);
        let h = (hi - lo) / n as f64;
        for t in [-2.0, -0.5, 0.0, 1.3, 3.0] {
            let mut acc = 0.0;
            for i in 0..=n {
                let zc = lo + i as f64 * h;
                let wt = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += wt * mix.log_pdf(&DVector::from_vec(vec![zc, t])).unwrap().exp();
            }
            let want = mixture_log_pdf(&w, &g, &DVector::from_element(1, t)).unwrap().exp();
            assert!((acc * h - want).abs() < 1e-4);
        }
    }

    fn shared_set(rng: &mut GjeRng, k: usize, d: usize) -> PrototypeSet {
        PrototypeSet {
            prototypes: standard_normal(rng, k, d) * 2.0,
            covs: PrototypeCovs::Shared(random_spd(rng, d)),
            log_weights: standard_normal(rng, k, 1).column(0).into_owned(),
        }
    }

    #[test]
    fn proto_shared_peak_value() {
        let z = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = PrototypeSet {
            prototypes: DMatrix::from_row_slice(1, 3, z.as_slice()),
            covs: PrototypeCovs::Shared(DMatrix::identity(3, 3)),
            log_weights: DVector::zeros(1),
        };
        assert_eq!(proto_nll_shared(&z, &p).unwrap(), 0.0);
    }

    #[test]
    fn proto_shared_translation_invariance() {
        let mut rng = seeded(7);
        let p = shared_set(&mut rng, 4, 3);
        let z = standard_normal(&mut rng, 3, 1).column(0).into_owned();
        let shift = DVector::from_vec(vec![5.0, -3.0, 1.5]);
        let mut q = p.clone();
        for mut r in q.prototypes.row_iter_mut() {
            r += shift.transpose();
        }
        let a = proto_nll_shared(&z, &p).unwrap();
        let b = proto_nll_shared(&(z + shift), &q).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn proto_losses_match_dense_density() {
        let mut rng = seeded(8);
        let p = shared_set(&mut rng, 5, 3);
        let cov = match &p.covs {
            PrototypeCovs::Shared(c) => c.clone(),
            _ => unreachable!(),
        };
        let lse = logsumexp(p.log_weights.as_slice());
        let w: Vec<f64> = p.log_weights.iter().map(|l| (l - lse).exp()).collect();
        let means: Vec<DVector<f64>> = (0..5).map(|k| p.prototypes.row(k).transpose()).collect();
        for _ in 0..10 {
            let z = standard_normal(&mut rng, 3, 1).column(0).into_owned() * 2.0;
            let dense = dense_log_pdf(&w, &means, &vec![cov.clone(); 5], &z);
            let want = -dense - 1.5 * LN_2PI;
            assert!((proto_nll_shared(&z, &p).unwrap() - want).abs() < 1e-10);
            assert!((proto_nll_full(&z, &p).unwrap() - want).abs() < 1e-10);
        }

        let covs: Vec<DMatrix<f64>> = (0..4).map(|_| random_spd(&mut rng, 3)).collect();
        let q = PrototypeSet {
            prototypes: standard_normal(&mut rng, 4, 3),
            covs: PrototypeCovs::PerComponent(covs.clone()),
            log_weights: standard_normal(&mut rng, 4, 1).column(0).into_owned(),
        };
        let lse = logsumexp(q.log_weights.as_slice());
        let w: Vec<f64> = q.log_weights.iter().map(|l| (l - lse).exp()).collect();
        let means: Vec<DVector<f64>> = (0..4).map(|k| q.prototypes.row(k).transpose()).collect();
        for _ in 0..10 {
            let z = standard_normal(&mut rng, 3, 1).column(0).into_owned();
            let want = -dense_log_pdf(&w, &means, &covs, &z) - 1.5 * LN_2PI;
            assert!((proto_nll_full(&z, &q).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn proto_full_reduces_to_shared() {
        let mut rng = seeded(9);
        let p = shared_set(&mut rng, 3, 4);
        let cov = match &p.covs {
            PrototypeCovs::Shared(c) => c.clone(),
            _ => unreachable!(),
        };
        let mut q = p.clone();
        q.covs = PrototypeCovs::PerComponent(vec![cov; 3]);
        let z = standard_normal(&mut rng, 4, 1).column(0).into_owned();
        assert!((proto_nll_full(&z, &q).unwrap() - proto_nll_shared(&z, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn proto_full_prefers_the_near_tight_component() {
        let p = PrototypeSet {
            prototypes: DMatrix::from_row_slice(2, 1, &[0.0, 50.0]),
            covs: PrototypeCovs::PerComponent(vec![DMatrix::from_element(1, 1, 0.01), DMatrix::from_element(1, 1, 1e4)]),
            log_weights: DVector::zeros(2),
        };
        let z = DVector::from_element(1, 0.05);
        let tight = -(0.5f64.ln() - 0.5 * 0.05 * 0.05 / 0.01 - 0.5 * 0.01f64.ln());
        assert!((proto_nll_full(&z, &p).unwrap() - tight).abs() < 1e-3);
    }

    #[test]
    fn proto_losses_survive_huge_distances() {
        let p = PrototypeSet {
            prototypes: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            covs: PrototypeCovs::Shared(DMatrix::from_element(1, 1, 1.0)),
            log_weights: DVector::zeros(2),
        };
        let z = DVector::from_element(1, 1e3 * 2f64.sqrt());
        let v = proto_nll_shared(&z, &p).unwrap();
        assert!(v.is_finite() && v > 4e5);
        assert!(proto_nll_full(&z, &p).unwrap().is_finite());
    }

    #[test]
    fn em_single_component_is_the_mle() {
        let mut rng = seeded(10);
        let data = standard_normal(&mut rng, 200, 3) * DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 0.2, 0.0, 0.0, 0.7]);
        let fit = em_fit(&data, 1, &EmOptions { k: 1, ..Default::default() }, &mut rng).unwrap();
        let n = data.nrows() as f64;
        let mean = data.row_sum().transpose() / n;
        let mut c = data.clone();
        for mut r in c.row_iter_mut() {
            r -= mean.transpose();
        }
        let cov = c.transpose() * &c / n;
        let comp = &fit.mixture.components()[0];
        assert!((comp.full_mean() - mean).amax() < 1e-12);
        assert!((comp.full_cov() - cov).amax() < 1e-12);
    }

    #[test]
    fn em_recovers_separated_clusters() {
        let mut rng = seeded(11);
        let mut data = standard_normal(&mut rng, 1000, 2);
        for i in 0..1000 {
            let s = if i % 2 == 0 { 5.0 } else { -5.0 };
            data[(i, 0)] += s;
            data[(i, 1)] += s;
        }
        let fit = em_fit(&data, 1, &EmOptions { k: 2, ..Default::default() }, &mut rng).unwrap();
        assert!(fit.converged);
        let mut means: Vec<f64> = fit.mixture.components().iter().map(|c| c.mean_c[0]).collect();
        means.sort_by(|a, b| a.total_cmp(b));
        assert!((means[0] + 5.0).abs() < 0.1 && (means[1] - 5.0).abs() < 0.1);
        for c in fit.mixture.components() {
            assert!((c.mean_t[0] - c.mean_c[0]).abs() < 0.2);
        }
    }

    #[test]
    fn em_log_likelihood_is_monotone() {
        let mut rng = seeded(12);
        let ds = crate::synth::gen_dataset_a(1500, 0.05, &mut rng);
        let fit = em_fit(&ds.joint_matrix(), 1, &EmOptions::default(), &mut rng).unwrap();
        assert!(fit.log_likelihood.len() > 2);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn em_rejects_more_components_than_rows() {
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(em_fit(&data, 1, &EmOptions { k: 3, ..Default::default() }, &mut seeded(0)).is_err());
    }

    #[test]
    fn em_flags_collapsed_components() {
        // Three distinct points and three components: every component
        // collapses onto a single point, which the floor cannot save.
        let data = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 0.0]);
        let opts = EmOptions { k: 3, var_floor: 0.0, ..Default::default() };
        assert!(matches!(em_fit(&data, 1, &opts, &mut seeded(0)), Err(Error::DegenerateComponent { .. })));
    }

    #[test]
    fn total_variance_examples() {
        let mut rng = seeded(13);
        let j = random_joint(&mut rng, 1, 2);
        let mix = JointMixture::new(DVector::from_element(1, 1.0), vec![j]).unwrap();
        let cm = conditional_mixture(&mix, &DVector::from_element(1, 0.2)).unwrap();
        let (m, c) = total_variance(&cm);
        assert_eq!(m, cm.cond_means[0]);
        assert!((c - &cm.cond_covs[0]).amax() < 1e-15);

        let cm = ConditionalMixture {
            responsibilities: DVector::from_vec(vec![0.5, 0.5]),
            cond_means: vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
            cond_covs: vec![DMatrix::from_element(1, 1, 1e-12); 2],
        };
        let (m, c) = total_variance(&cm);
        assert!(m[0].abs() < 1e-15);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn total_variance_matches_monte_carlo() {
        let mut rng = seeded(14);
        let mix = random_mixture(&mut rng, 3, 1, 2);
        let cm = conditional_mixture(&mix, &DVector::from_element(1, 0.3)).unwrap();
        let comps: Vec<Gaussian> =
            (0..3).map(|k| Gaussian::new(cm.cond_means[k].clone(), cm.cond_covs[k].clone()).unwrap()).collect();
        let s = sample_mixture(&cm.responsibilities, &comps, 1_000_000, &mut rng).unwrap();
        let n = s.nrows() as f64;
        let mean = s.row_sum().transpose() / n;
        let mut c = s.clone();
        for mut r in c.row_iter_mut() {
            r -= mean.transpose();
        }
        let cov = c.transpose() * &c / n;
        let (_, want) = total_variance(&cm);
        for i in 0..2 {
            assert!((cov[(i, i)] / want[(i, i)] - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn sampling_examples() {
        let mut rng = seeded(15);
        let comps = vec![
            Gaussian::new(DVector::from_element(2, -3.0), DMatrix::identity(2, 2) * 1e-14).unwrap(),
            Gaussian::new(DVector::from_element(2, 3.0), DMatrix::identity(2, 2) * 1e-14).unwrap(),
        ];
        let out = sample_mixture_labeled(&DVector::from_vec(vec![0.0, 1.0]), &comps, 100, &mut rng).unwrap();
        assert!(out.labels.iter().all(|&l| l == 1));
        assert!(out.samples.iter().all(|v| (v - 3.0).abs() < 1e-5));
        let out = sample_mixture_labeled(&DVector::from_vec(vec![0.5, 0.5]), &comps, 100, &mut rng).unwrap();
        for (i, &l) in out.labels.iter().enumerate() {
            assert!((out.samples[(i, 0)] - comps[l].mean()[0]).abs() < 1e-5);
        }
        let a = sample_mixture(&DVector::from_vec(vec![0.5, 0.5]), &comps, 10, &mut seeded(3)).unwrap();
        let b = sample_mixture(&DVector::from_vec(vec![0.5, 0.5]), &comps, 10, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_occupancy_within_three_standard_errors() {
        let mut rng = seeded(16);
        let mix = random_mixture(&mut rng, 3, 1, 1);
        let out = mix.sample(100_000, None, SamplingWeights::Learned, &mut rng).unwrap();
        let n = 100_000.0;
        for k in 0..3 {
            let p = mix.weights()[k];
            let count = out.labels.iter().filter(|&&l| l == k).count() as f64;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((count / n - p).abs() < 3.0 * se);
        }
        let u = mix.sample(30_000, Some(Block::Target), SamplingWeights::Uniform, &mut rng).unwrap();
        assert_eq!(u.samples.ncols(), 1);
        let c0 = u.labels.iter().filter(|&&l| l == 0).count() as f64 / 30_000.0;
        assert!((c0 - 1.0 / 3.0).abs() < 0.02);
    }

    fn unit(v: DVector<f64>) -> DVector<f64> {
        let n = v.norm();
        v / n
    }

    #[test]
    fn infonce_examples() {
        let mut rng = seeded(17);
        let zt = unit(standard_normal(&mut rng, 4, 1).column(0).into_owned());
        let zc = unit(standard_normal(&mut rng, 4, 1).column(0).into_owned());
        let bank = DMatrix::from_row_slice(1, 4, zt.as_slice());
        assert!(dam_conditional_nll(&zc, &zt, &bank, 0.1).unwrap().abs() < 1e-12);
        let bad = DVector::from_element(4, 1.0);
        assert!(matches!(dam_conditional_nll(&bad, &zt, &bank, 0.1), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn infonce_is_the_kde_conditional_up_to_a_constant() {
        let mut rng = seeded(18);
        let (m, d, tau) = (16, 8, 0.01);
        let mut bank = standard_normal(&mut rng, m, d);
        for mut r in bank.row_iter_mut() {
            let n = r.norm();
            r /= n;
        }
        let kde = JointMixture::kde(&bank, &bank, tau).unwrap();
        let mc = MixtureConditioner::new(&kde).unwrap();
        let mut gaps = Vec::new();
        for i in 0..50 {
            let zt = bank.row(i % m).transpose();
            let zc = unit(&zt + standard_normal(&mut rng, d, 1).column(0) * 0.05);
            let exact = -mc.condition(&zc).unwrap().log_pdf(&zt).unwrap();
            gaps.push(dam_conditional_nll(&zc, &zt, &bank, tau).unwrap() - exact);
        }
        let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= 1e-6, "spread {}", hi - lo);
        // The constant is the isotropic normalizer of the target kernel.
        let c = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * tau).ln();
        assert!((gaps[0] - c).abs() < 1e-6);
    }

    #[test]
    fn mixture_serde_round_trip() {
        let mut rng = seeded(19);
        let mix = random_mixture(&mut rng, 3, 1, 2);
        let s = serde_json::to_string(&mix).unwrap();
        let back: JointMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(back.weights(), mix.weights());
        for (a, b) in back.components().iter().zip(mix.components()) {
            assert!((a.full_cov() - b.full_cov()).amax() < 1e-15);
        }
        let bad = s.replacen("[", "[0.9,", 1);
        assert!(serde_json::from_str::<JointMixture>(&bad).is_err());
    }

    #[test]
    fn mixture_log_pdf_matches_dense() {
        let mut rng = seeded(20);
        let mix = random_mixture(&mut rng, 3, 2, 1);
        let w: Vec<f64> = mix.weights().iter().copied().collect();
        let means: Vec<DVector<f64>> = mix.components().iter().map(|c| c.full_mean()).collect();
        let covs: Vec<DMatrix<f64>> = mix.components().iter().map(|c| c.full_cov()).collect();
        for _ in 0..20 {
            let z = standard_normal(&mut rng, 3, 1).column(0).into_owned();
            assert!((mix.log_pdf(&z).unwrap() - dense_log_pdf(&w, &means, &covs, &z)).abs() < 1e-10);
            let g = mix.components()[0].as_gaussian();
            assert!(mvn_nll(&z, &g).unwrap().is_finite());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn responsibilities_form_a_simplex(seed in 0u64..100_000, scale in 0.0f64..1e3) {
                let mut rng = seeded(seed);
                let mix = random_mixture(&mut rng, 3, 2, 1);
                let zc = standard_normal(&mut rng, 2, 1).column(0).into_owned() * scale;
                let cm = conditional_mixture(&mix, &zc).unwrap();
                prop_assert!((cm.responsibilities.sum() - 1.0).abs() < 1e-10);
                prop_assert!(cm.responsibilities.iter().all(|g| g.is_finite() && *g >= 0.0));
            }

            #[test]
            fn total_variance_is_psd(seed in 0u64..100_000) {
                let mut rng = seeded(seed);
                let mix = random_mixture(&mut rng, 4, 1, 3);
                let zc = standard_normal(&mut rng, 1, 1).column(0).into_owned();
                let (_, c) = total_variance(&conditional_mixture(&mix, &zc).unwrap());
                let eig = c.symmetric_eigen();
                prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
            }

            #[test]
            fn shared_equals_full_for_equal_covariances(seed in 0u64..100_000, k in 1usize..6) {
                let mut rng = seeded(seed);
                let p = shared_set(&mut rng, k, 3);
                let cov = match &p.covs { PrototypeCovs::Shared(c) => c.clone(), _ => unreachable!() };
                let mut q = p.clone();
                q.covs = PrototypeCovs::PerComponent(vec![cov; k]);
                let z = standard_normal(&mut rng, 3, 1).column(0).into_owned() * 3.0;
                prop_assert!((proto_nll_full(&z, &q).unwrap() - proto_nll_shared(&z, &p).unwrap()).abs() < 1e-12);
            }
        }
    }
}
