//! Particle-filter memory bank and the FIFO queue it replaces.
//!
//! The bank holds `M` particles with simplex weights. Each step pools the
//! bank with the incoming batch, reweights every pooled particle by its mean
//! likelihood under the batch queries, and resamples back to `M`.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{factor_with_policy, logsumexp};

const NORM_TOL: f64 = 1e-6;
const SIMPLEX_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankMode {
    /// Unit-norm target embeddings with kernel `exp(z_cᵀz_t / τ)`.
    Isotropic,
    /// Joint means sharing one full covariance.
    FullCov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleBank {
    particles: DMatrix<f64>,
    weights: DVector<f64>,
    /// Provenance tag per particle; clones keep their source's tag.
    ids: Vec<u64>,
    tau: f64,
    mode: BankMode,
    shared_cov: Option<DMatrix<f64>>,
}

fn check_unit_rows(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for row in m.row_iter() {
        let norm = row.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    Ok(())
}

fn check_weights(w: &DVector<f64>, n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} particles", w.len())));
    }
    if w.iter().any(|&x| !(x >= 0.0)) || (w.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument("weights must be a simplex".into()));
    }
    Ok(())
}

impl ParticleBank {
    /// Unit-norm particles with uniform weights.
    pub fn isotropic(particles: DMatrix<f64>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
        }
        check_unit_rows(&particles, "bank")?;
        let m = particles.nrows();
        Ok(Self {
            weights: DVector::from_element(m, 1.0 / m as f64),
            ids: (0..m as u64).collect(),
            particles,
            tau,
            mode: BankMode::Isotropic,
            shared_cov: None,
        })
    }

    /// Joint means with one shared covariance and uniform weights.
    pub fn full_cov(means: DMatrix<f64>, shared_cov: DMatrix<f64>) -> Result<Self> {
        let m = means.nrows();
        if m == 0 {
            return Err(Error::InvalidArgument("bank is empty".into()));
        }
        if shared_cov.shape() != (means.ncols(), means.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {:?}, particles have {} columns",
                shared_cov.shape(),
                means.ncols()
            )));
        }
        factor_with_policy(&shared_cov)?;
        Ok(Self {
            weights: DVector::from_element(m, 1.0 / m as f64),
            ids: (0..m as u64).collect(),
            particles: means,
            tau: 1.0,
            mode: BankMode::FullCov,
            shared_cov: Some(shared_cov),
        })
    }

    pub fn with_weights(mut self, weights: DVector<f64>) -> Result<Self> {
        check_weights(&weights, self.particles.nrows())?;
        self.weights = weights;
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.particles.nrows() {
            return Err(Error::DimensionMismatch(format!("{} ids for {} particles", ids.len(), self.particles.nrows())));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn particles(&self) -> &DMatrix<f64> {
        &self.particles
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> BankMode {
        self.mode
    }

    pub fn shared_cov(&self) -> Option<&DMatrix<f64>> {
        self.shared_cov.as_ref()
    }

    pub fn len(&self) -> usize {
        self.particles.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.particles.ncols()
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    fn require(&self, mode: BankMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidArgument(format!("operation needs a {mode:?} bank, this one is {:?}", self.mode)));
        }
        Ok(())
    }

    fn with_pool(&self, particles: DMatrix<f64>, weights: DVector<f64>, ids: Vec<u64>) -> Self {
        Self { particles, weights, ids, tau: self.tau, mode: self.mode, shared_cov: self.shared_cov.clone() }
    }
}

/// `1 / Σ W²`.
pub fn ess(weights: &DVector<f64>) -> f64 {
    1.0 / weights.norm_squared()
}

/// `−log[exp(z_cᵀz_t⁺/τ) / Σ_m W_m exp(z_cᵀz_m/τ)]`, in log space.
pub fn weighted_infonce(zc: &DVector<f64>, zt_pos: &DVector<f64>, bank: &ParticleBank) -> Result<f64> {
    bank.require(BankMode::Isotropic)?;
    check_pair(zc, zt_pos, bank.dim())?;
    let scores: Vec<f64> = bank
        .particles
        .row_iter()
        .zip(bank.weights.iter())
        .map(|(p, &w)| w.ln() + p.transpose().dot(zc) / bank.tau)
        .collect();
    Ok(logsumexp(&scores) - zc.dot(zt_pos) / bank.tau)
}

/// `−log[exp(z_cᵀz_t⁺/τ) / Σ_m exp(z_cᵀz_m/τ)]` over the bank's particles.
pub fn unweighted_infonce(zc: &DVector<f64>, zt_pos: &DVector<f64>, bank: &ParticleBank) -> Result<f64> {
    bank.require(BankMode::Isotropic)?;
    check_pair(zc, zt_pos, bank.dim())?;
    let scores: Vec<f64> = bank.particles.row_iter().map(|p| p.transpose().dot(zc) / bank.tau).collect();
    Ok(logsumexp(&scores) - zc.dot(zt_pos) / bank.tau)
}

fn check_pair(zc: &DVector<f64>, zt: &DVector<f64>, d: usize) -> Result<()> {
    for v in [zc, zt] {
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!("vector has {} entries, bank has {d}", v.len())));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
    }
    Ok(())
}

/// Pool priors: old weights scaled by `M/(M+B)`, new entries at `1/(M+B)`.
fn pool_log_priors(old: &DVector<f64>, b: usize) -> Vec<f64> {
    let total = (old.len() + b) as f64;
    let scale = old.len() as f64 / total;
    old.iter().map(|w| (w * scale).ln()).chain(std::iter::repeat(-total.ln()).take(b)).collect()
}

/// Normalizes `prior · likelihood` given both in log space.
pub fn normalize_log_weights(log_prior: &[f64], log_lik: &[f64]) -> Result<DVector<f64>> {
    let joint: Vec<f64> = log_prior.iter().zip(log_lik).map(|(p, l)| p + l).collect();
    let z = logsumexp(&joint);
    if !z.is_finite() {
        return Err(Error::AllZeroLikelihood);
    }
    Ok(DVector::from_iterator(joint.len(), joint.iter().map(|j| (j - z).exp())))
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn pooled_ids(bank: &ParticleBank, incoming_ids: Option<&[u64]>, b: usize) -> Result<Vec<u64>> {
    let mut ids = bank.ids.clone();
    match incoming_ids {
        Some(new) if new.len() == b => ids.extend_from_slice(new),
        Some(new) => {
            return Err(Error::DimensionMismatch(format!("{} ids for {b} incoming particles", new.len())));
        }
        None => {
            let start = bank.ids.iter().max().map_or(0, |m| m + 1);
            ids.extend(start..start + b as u64);
        }
    }
    Ok(ids)
}

/// Pools the bank with `incoming` targets and reweights every pooled particle
/// by `(1/B) Σ_b exp(z_c,bᵀ z_m / τ)` over the context `queries`.
///
/// The result holds all `M + B` particles with normalized weights.
pub fn importance_update(
    bank: &ParticleBank,
    queries: &DMatrix<f64>,
    incoming: &DMatrix<f64>,
    incoming_ids: Option<&[u64]>,
) -> Result<ParticleBank> {
    bank.require(BankMode::Isotropic)?;
    if queries.ncols() != bank.dim() || incoming.ncols() != bank.dim() {
        return Err(Error::DimensionMismatch("queries and incoming must match the bank dimension".into()));
    }
    check_unit_rows(queries, "query batch")?;
    check_unit_rows(incoming, "incoming batch")?;
    let b = incoming.nrows();
    let pool = stack(&bank.particles, incoming);
    let sims = &pool * queries.transpose() / bank.tau;
    let ln_b = (queries.nrows() as f64).ln();
    let log_lik: Vec<f64> = sims.row_iter().map(|r| logsumexp(r.transpose().as_slice()) - ln_b).collect();
    let weights = normalize_log_weights(&pool_log_priors(&bank.weights, b), &log_lik)?;
    let ids = pooled_ids(bank, incoming_ids, b)?;
    Ok(bank.with_pool(pool, weights, ids))
}

/// Full-covariance update: pooled means are `bank ∪ queries` and each is
/// weighted by `(1/B) Σ_b exp(−½ (Z_b − μ_m)ᵀ Σ⁻¹ (Z_b − μ_m))`. No
/// normalizing constant of `Σ` enters.
pub fn general_importance_update(
    bank: &ParticleBank,
    queries: &DMatrix<f64>,
    incoming_ids: Option<&[u64]>,
) -> Result<ParticleBank> {
    bank.require(BankMode::FullCov)?;
    if queries.ncols() != bank.dim() || queries.nrows() == 0 {
        return Err(Error::DimensionMismatch("query batch must be nonempty and match the bank dimension".into()));
    }
    let cov = bank.shared_cov.as_ref().expect("full-covariance banks carry a covariance");
    let factor = factor_with_policy(cov)?;
    let b = queries.nrows();
    let pool = stack(&bank.particles, queries);
    let ln_b = (b as f64).ln();
    let log_lik: Vec<f64> = pool
        .row_iter()
        .map(|mu| {
            let terms: Vec<f64> =
                queries.row_iter().map(|z| -0.5 * factor.mahalanobis(&(z - mu).transpose())).collect();
            logsumexp(&terms) - ln_b
        })
        .collect();
    let weights = normalize_log_weights(&pool_log_priors(&bank.weights, b), &log_lik)?;
    let ids = pooled_ids(bank, incoming_ids, b)?;
    Ok(bank.with_pool(pool, weights, ids))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleScheme {
    #[default]
    Systematic,
    Multinomial,
}

/// Indices of `m` draws from `weights` with replacement.
pub fn resample_indices<R: Rng + ?Sized>(weights: &DVector<f64>, m: usize, rng: &mut R, scheme: ResampleScheme) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights.iter() {
        acc += w;
        cdf.push(acc);
    }
    let last = weights.len() - 1;
    let pick = |u: f64| cdf.partition_point(|&c| c <= u).min(last);
    match scheme {
        ResampleScheme::Multinomial => (0..m).map(|_| pick(rng.random::<f64>() * acc)).collect(),
        ResampleScheme::Systematic => {
            let u0: f64 = rng.random();
            let mut out = Vec::with_capacity(m);
            let mut j = 0;
            for i in 0..m {
                let u = (i as f64 + u0) / m as f64 * acc;
                while j < last && cdf[j] <= u {
                    j += 1;
                }
                out.push(j);
            }
            out
        }
    }
}

/// Draws `m` particles proportionally to the pool weights and resets the
/// weights to `1/m`.
pub fn resample<R: Rng + ?Sized>(pool: &ParticleBank, m: usize, rng: &mut R, scheme: ResampleScheme) -> Result<ParticleBank> {
    if pool.is_empty() || m == 0 {
        return Err(Error::InvalidArgument("resampling needs a nonempty pool and target".into()));
    }
    let idx = resample_indices(&pool.weights, m, rng, scheme);
    let particles = pool.particles.select_rows(idx.iter());
    let ids = idx.iter().map(|&i| pool.ids[i]).collect();
    Ok(pool.with_pool(particles, DVector::from_element(m, 1.0 / m as f64), ids))
}

/// Fixed-capacity ring buffer that overwrites its oldest entry first.
#[derive(Clone, Debug, PartialEq)]
pub struct FifoBank {
    queue: DMatrix<f64>,
    ids: Vec<u64>,
    head: usize,
    len: usize,
}

impl FifoBank {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::InvalidArgument("FIFO bank needs positive capacity and dimension".into()));
        }
        Ok(Self { queue: DMatrix::zeros(capacity, dim), ids: vec![0; capacity], head: 0, len: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.queue.nrows()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Slot that the next push overwrites.
    pub fn head(&self) -> usize {
        self.head
    }

    pub fn push(&mut self, incoming: &DMatrix<f64>, ids: Option<&[u64]>) -> Result<()> {
        let m = self.capacity();
        if incoming.ncols() != self.queue.ncols() || incoming.nrows() > m {
            return Err(Error::DimensionMismatch(format!(
                "batch is {:?}, queue holds {m} rows of {}",
                incoming.shape(),
                self.queue.ncols()
            )));
        }
        if let Some(ids) = ids {
            if ids.len() != incoming.nrows() {
                return Err(Error::DimensionMismatch("one id per incoming row".into()));
            }
        }
        for (i, row) in incoming.row_iter().enumerate() {
            self.queue.row_mut(self.head).copy_from(&row);
            self.ids[self.head] = ids.map_or(0, |ids| ids[i]);
            self.head = (self.head + 1) % m;
            self.len = (self.len + 1).min(m);
        }
        Ok(())
    }

    fn order(&self) -> impl Iterator<Item = usize> + '_ {
        let m = self.capacity();
        let start = (self.head + m - self.len) % m;
        (0..self.len).map(move |i| (start + i) % m)
    }

    /// Entries from oldest to newest.
    pub fn contents(&self) -> DMatrix<f64> {
        self.queue.select_rows(self.order().collect::<Vec<_>>().iter())
    }

    /// Ids from oldest to newest.
    pub fn ids(&self) -> Vec<u64> {
        self.order().map(|i| self.ids[i]).collect()
    }
}

pub fn fifo_push(bank: &FifoBank, incoming: &DMatrix<f64>) -> Result<FifoBank> {
    let mut next = bank.clone();
    next.push(incoming, None)?;
    Ok(next)
}

/// When to resample the pooled particles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplePolicy {
    #[default]
    EveryStep,
    /// Resample only when the pool ESS drops below this fraction of the pool
    /// size. Otherwise the oldest `B` particles are evicted and the
    /// surviving weights are renormalized and carried over.
    EssBelow(f64),
}

/// One bank-maintenance step. Returns the updated bank and the pool ESS
/// measured before resampling.
pub fn smc_step<R: Rng + ?Sized>(
    bank: &ParticleBank,
    queries: &DMatrix<f64>,
    incoming: &DMatrix<f64>,
    incoming_ids: &[u64],
    policy: ResamplePolicy,
    scheme: ResampleScheme,
    rng: &mut R,
) -> Result<(ParticleBank, f64)> {
    let m = bank.len();
    let pool = importance_update(bank, queries, incoming, Some(incoming_ids))?;
    let pool_ess = pool.ess();
    let resample_now = match policy {
        ResamplePolicy::EveryStep => true,
        ResamplePolicy::EssBelow(frac) => pool_ess < frac * pool.len() as f64,
    };
    if resample_now {
        return Ok((resample(&pool, m, rng, scheme)?, pool_ess));
    }
    let b = pool.len() - m;
    let keep: Vec<usize> = (b..pool.len()).collect();
    let mut weights = pool.weights.select_rows(keep.iter());
    let mass = weights.sum();
    if mass > 0.0 {
        weights /= mass;
    } else {
        weights.fill(1.0 / m as f64);
    }
    let ids = keep.iter().map(|&i| pool.ids[i]).collect();
    Ok((pool.with_pool(pool.particles.select_rows(keep.iter()), weights, ids), pool_ess))
}

/// Synthetic stream of unit-norm embedding pairs clustered by class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub classes: usize,
    pub dim: usize,
    pub rare_class: usize,
    /// Frequency of the rare class; the rest share the remainder equally.
    pub rare_freq: f64,
    /// Standard deviation of the Gaussian perturbation before normalizing.
    pub spread: f64,
    pub batch: usize,
    pub steps: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self { classes: 10, dim: 16, rare_class: 0, rare_freq: 0.01, spread: 0.25, batch: 32, steps: 50_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub m: usize,
    pub tau: f64,
    pub scheme: ResampleScheme,
    pub policy: ResamplePolicy,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self { m: 256, tau: 0.1, scheme: ResampleScheme::Systematic, policy: ResamplePolicy::EveryStep }
    }
}

/// Class centres plus a sampler for `(class, z_c, z_t)` triples.
#[derive(Clone, Debug)]
pub struct ClusterStream {
    centers: DMatrix<f64>,
    cdf: Vec<f64>,
    spread: f64,
}

fn unit(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    v / n
}

impl ClusterStream {
    pub fn new<R: Rng + ?Sized>(cfg: &StreamConfig, rng: &mut R) -> Result<Self> {
        if cfg.classes < 2 || cfg.dim < 2 || cfg.rare_class >= cfg.classes || !(0.0..1.0).contains(&cfg.rare_freq) {
            return Err(Error::InvalidArgument(format!("invalid stream configuration {cfg:?}")));
        }
        let mut centers = DMatrix::zeros(cfg.classes, cfg.dim);
        for mut row in centers.row_iter_mut() {
            let v = unit(DVector::from_fn(cfg.dim, |_, _| StandardNormal.sample(rng)));
            row.copy_from(&v.transpose());
        }
        let common = (1.0 - cfg.rare_freq) / (cfg.classes - 1) as f64;
        let mut acc = 0.0;
        let cdf = (0..cfg.classes)
            .map(|c| {
                acc += if c == cfg.rare_class { cfg.rare_freq } else { common };
                acc
            })
            .collect();
        Ok(Self { centers, cdf, spread: cfg.spread })
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    fn view<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> DVector<f64> {
        let d = self.centers.ncols();
        let noise = DVector::from_fn(d, |_, _| StandardNormal.sample(rng)) * self.spread;
        unit(self.centers.row(class).transpose() + noise)
    }

    /// `n` draws: class labels and two independent views of each.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<usize>, DMatrix<f64>, DMatrix<f64>) {
        let d = self.centers.ncols();
        let last = self.cdf.len() - 1;
        let mut labels = Vec::with_capacity(n);
        let mut zc = DMatrix::zeros(n, d);
        let mut zt = DMatrix::zeros(n, d);
        for i in 0..n {
            let u: f64 = rng.random::<f64>() * self.cdf[last];
            let c = self.cdf.partition_point(|&x| x <= u).min(last);
            labels.push(c);
            zc.row_mut(i).copy_from(&self.view(c, rng).transpose());
            zt.row_mut(i).copy_from(&self.view(c, rng).transpose());
        }
        (labels, zc, zt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// Pool ESS before resampling.
    pub ess: f64,
    /// ESS of the bank after the step.
    pub bank_ess: f64,
    pub smc_counts: Vec<usize>,
    pub fifo_counts: Vec<usize>,
    /// Share of the previous bank's rare-class particles still present.
    pub smc_rare_retention: Option<f64>,
    pub fifo_rare_retention: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub smc_rare_occupancy: f64,
    pub fifo_rare_occupancy: f64,
    pub smc_rare_retention: f64,
    pub fifo_rare_retention: f64,
    pub min_ess: f64,
    pub max_ess: f64,
    pub mean_ess: f64,
    /// Every post-step bank ESS equalled `M` to within `1e-9` relative.
    pub bank_ess_reset: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub rare_class: usize,
    pub m: usize,
    pub steps: Vec<StepMetrics>,
    pub summary: SimSummary,
}

fn counts(ids: &[u64], labels: &[usize], classes: usize) -> Vec<usize> {
    let mut out = vec![0; classes];
    for &id in ids {
        out[labels[id as usize]] += 1;
    }
    out
}

fn retention(prev: &[u64], now: &BTreeSet<u64>, labels: &[usize], rare: usize) -> Option<f64> {
    let rare_prev: BTreeSet<u64> = prev.iter().copied().filter(|&id| labels[id as usize] == rare).collect();
    if rare_prev.is_empty() {
        return None;
    }
    Some(rare_prev.iter().filter(|id| now.contains(id)).count() as f64 / rare_prev.len() as f64)
}

fn mean_some(xs: impl Iterator<Item = Option<f64>>) -> f64 {
    let (s, n) = xs.flatten().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs the bank-maintenance loop for an SMC bank and a FIFO queue on the
/// same stream. Both start from the same first `M` targets.
pub fn smc_simulation<R: Rng + ?Sized>(stream_cfg: &StreamConfig, bank_cfg: &BankConfig, rng: &mut R) -> Result<SimMetrics> {
    if bank_cfg.m == 0 || stream_cfg.batch == 0 || stream_cfg.batch > bank_cfg.m {
        return Err(Error::InvalidArgument("need 0 < batch ≤ M".into()));
    }
    let stream = ClusterStream::new(stream_cfg, rng)?;
    let classes = stream_cfg.classes;
    let rare = stream_cfg.rare_class;
    let m = bank_cfg.m;

    let (mut labels, _, init) = stream.draw(m, rng);
    let init_ids: Vec<u64> = (0..m as u64).collect();
    let mut smc = ParticleBank::isotropic(init.clone(), bank_cfg.tau)?.with_ids(init_ids.clone())?;
    let mut fifo = FifoBank::new(m, stream_cfg.dim)?;
    fifo.push(&init, Some(&init_ids))?;

    let mut steps = Vec::with_capacity(stream_cfg.steps);
    for step in 0..stream_cfg.steps {
        let (batch_labels, zc, zt) = stream.draw(stream_cfg.batch, rng);
        let start = labels.len() as u64;
        let ids: Vec<u64> = (start..start + batch_labels.len() as u64).collect();
        labels.extend(batch_labels);

        let prev_smc = smc.ids().to_vec();
        let prev_fifo = fifo.ids();
        let (next, pool_ess) = smc_step(&smc, &zc, &zt, &ids, bank_cfg.policy, bank_cfg.scheme, rng)?;
        smc = next;
        fifo.push(&zt, Some(&ids))?;

        let fifo_ids = fifo.ids();
        let smc_set: BTreeSet<u64> = smc.ids().iter().copied().collect();
        let fifo_set: BTreeSet<u64> = fifo_ids.iter().copied().collect();
        steps.push(StepMetrics {
            step,
            ess: pool_ess,
            bank_ess: smc.ess(),
            smc_counts: counts(smc.ids(), &labels, classes),
            fifo_counts: counts(&fifo_ids, &labels, classes),
            smc_rare_retention: retention(&prev_smc, &smc_set, &labels, rare),
            fifo_rare_retention: retention(&prev_fifo, &fifo_set, &labels, rare),
        });
    }

    let n = steps.len().max(1) as f64;
    let ess_vals = steps.iter().map(|s| s.ess);
    let summary = SimSummary {
        smc_rare_occupancy: steps.iter().map(|s| s.smc_counts[rare] as f64 / m as f64).sum::<f64>() / n,
        fifo_rare_occupancy: steps.iter().map(|s| s.fifo_counts[rare] as f64 / m as f64).sum::<f64>() / n,
        smc_rare_retention: mean_some(steps.iter().map(|s| s.smc_rare_retention)),
        fifo_rare_retention: mean_some(steps.iter().map(|s| s.fifo_rare_retention)),
        min_ess: ess_vals.clone().fold(f64::INFINITY, f64::min),
        max_ess: ess_vals.clone().fold(f64::NEG_INFINITY, f64::max),
        mean_ess: ess_vals.sum::<f64>() / n,
        bank_ess_reset: steps.iter().all(|s| (s.bank_ess - m as f64).abs() <= 1e-9 * m as f64),
    };
    Ok(SimMetrics { rare_class: rare, m, steps, summary })
}

impl SimMetrics {
    /// CSV with one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let classes = self.steps.first().map_or(0, |s| s.smc_counts.len());
        let mut header = vec!["step".to_string(), "ess".into(), "bank_ess".into()];
        header.extend((0..classes).map(|c| format!("smc_class_{c}")));
        header.extend((0..classes).map(|c| format!("fifo_class_{c}")));
        header.extend(["smc_rare_retention".into(), "fifo_rare_retention".into()]);
        writeln!(out, "{}", header.join(","))?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for s in &self.steps {
            let mut row = vec![s.step.to_string(), s.ess.to_string(), s.bank_ess.to_string()];
            row.extend(s.smc_counts.iter().map(|c| c.to_string()));
            row.extend(s.fifo_counts.iter().map(|c| c.to_string()));
            row.push(opt(s.smc_rare_retention));
            row.push(opt(s.fifo_rare_retention));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
