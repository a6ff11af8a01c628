use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{flatten_layers, Layer, Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::gaussian::LN_2PI;
use crate::linalg::logsumexp;

/// Added to `exp(·)` so a component's scale never reaches zero.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-5;

/// Three linear heads on a shared trunk: mixing logits, component means,
/// and log-scales of isotropic components.
#[derive(Clone, Debug, PartialEq)]
pub struct MdnHead {
    k: usize,
    d_t: usize,
    sigma_floor: f64,
    logits: Layer,
    means: Layer,
    log_sigmas: Layer,
}

/// Per-sample mixture parameters for a batch of `N` inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MdnParams {
    pub logits: DMatrix<f64>,
    /// `N × K`, rows on the simplex.
    pub alpha: DMatrix<f64>,
    /// `N × (K·d_t)`, component `k` in columns `k·d_t .. (k+1)·d_t`.
    pub means: DMatrix<f64>,
    /// Pre-activation scales `s`, so that `σ = exp(s) + floor`.
    pub log_sigmas: DMatrix<f64>,
    /// `N × K`.
    pub sigma: DMatrix<f64>,
    pub d_t: usize,
}

impl MdnParams {
    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn k(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn mean(&self, i: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(self.d_t, |j, _| self.means[(i, k * self.d_t + j)])
    }

    /// `log α_k + log φ_k(t_i)` for every component, with the log-softmax
    /// taken from the logits directly so tiny weights stay exact.
    fn joint_terms(&self, targets: &DMatrix<f64>, i: usize) -> Vec<f64> {
        let row: Vec<f64> = self.logits.row(i).iter().copied().collect();
        let lse = logsumexp(&row);
        let lp = self.log_phi(targets, i);
        (0..self.k()).map(|j| row[j] - lse + lp[j]).collect()
    }

    /// Per-sample component log-densities `log φ_k(t_i)`.
    fn log_phi(&self, targets: &DMatrix<f64>, i: usize) -> Vec<f64> {
        let dt = self.d_t as f64;
        (0..self.k())
            .map(|k| {
                let s = self.sigma[(i, k)];
                let sq: f64 = (0..self.d_t).map(|j| (targets[(i, j)] - self.means[(i, k * self.d_t + j)]).powi(2)).sum();
                -0.5 * dt * LN_2PI - dt * s.ln() - 0.5 * sq / (s * s)
            })
            .collect()
    }
}

/// `dL/d(logits)`, `dL/d(means)` and `dL/d(log_sigmas)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MdnParamGrads {
    pub logits: DMatrix<f64>,
    pub means: DMatrix<f64>,
    pub log_sigmas: DMatrix<f64>,
}

impl MdnHead {
    pub fn new<R: Rng + ?Sized>(hidden: usize, k: usize, d_t: usize, sigma_floor: f64, rng: &mut R) -> Result<Self> {
        check_head(hidden, k, d_t, sigma_floor)?;
        Ok(Self {
            k,
            d_t,
            sigma_floor,
            logits: Layer::glorot(hidden, k, rng),
            means: Layer::glorot(hidden, k * d_t, rng),
            log_sigmas: Layer::glorot(hidden, k, rng),
        })
    }

    pub fn zeros(hidden: usize, k: usize, d_t: usize, sigma_floor: f64) -> Result<Self> {
        check_head(hidden, k, d_t, sigma_floor)?;
        Ok(Self {
            k,
            d_t,
            sigma_floor,
            logits: Layer::zeros(hidden, k),
            means: Layer::zeros(hidden, k * d_t),
            log_sigmas: Layer::zeros(hidden, k),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d_t(&self) -> usize {
        self.d_t
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn hidden(&self) -> usize {
        self.logits.fan_in()
    }

    pub fn layers(&self) -> [&Layer; 3] {
        [&self.logits, &self.means, &self.log_sigmas]
    }

    pub fn layers_mut(&mut self) -> [&mut Layer; 3] {
        [&mut self.logits, &mut self.means, &mut self.log_sigmas]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    pub fn forward(&self, h: &DMatrix<f64>) -> MdnParams {
        let logits = self.logits.forward(h);
        let mut alpha = logits.clone();
        for mut row in alpha.row_iter_mut() {
            let lse = logsumexp(&row.iter().copied().collect::<Vec<_>>());
            row.apply(|v| *v = (*v - lse).exp());
        }
        let log_sigmas = self.log_sigmas.forward(h);
        let sigma = log_sigmas.map(|s| s.exp() + self.sigma_floor);
        MdnParams { logits, alpha, means: self.means.forward(h), log_sigmas, sigma, d_t: self.d_t }
    }

    /// Head gradients in `[logits, means, log_sigmas]` order and `dL/dh`.
    pub fn backward(&self, h: &DMatrix<f64>, g: &MdnParamGrads) -> ([Layer; 3], DMatrix<f64>) {
        let (gl, dh1) = self.logits.backward(h, &g.logits);
        let (gm, dh2) = self.means.backward(h, &g.means);
        let (gs, dh3) = self.log_sigmas.backward(h, &g.log_sigmas);
        ([gl, gm, gs], dh1 + dh2 + dh3)
    }
}

fn check_head(hidden: usize, k: usize, d_t: usize, sigma_floor: f64) -> Result<()> {
    if hidden == 0 || k == 0 || d_t == 0 {
        return Err(Error::InvalidArgument("MDN widths and component count must be positive".into()));
    }
    if !(sigma_floor > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma floor must be positive, got {sigma_floor}")));
    }
    Ok(())
}

/// Mean over the batch of `−log Σ_k α_k N(t | μ_k, σ_k² I)`.
pub fn mdn_nll(p: &MdnParams, targets: &DMatrix<f64>) -> Result<f64> {
    check_targets(p, targets)?;
    let total: f64 = (0..p.n())
        .map(|i| -logsumexp(&p.joint_terms(targets, i)))
        .sum();
    Ok(total / p.n() as f64)
}

/// [`mdn_nll`] and its gradient with respect to the head pre-activations.
///
/// With `r` the component posterior: `dL/dlogit = α − r`,
/// `dL/dμ_k = −r_k (t − μ_k)/σ_k²`, `dL/dσ_k = r_k (d_t/σ_k − ‖t − μ_k‖²/σ_k³)`,
/// and `dσ/ds = exp(s)`.
pub fn mdn_nll_grad(p: &MdnParams, targets: &DMatrix<f64>) -> Result<(f64, MdnParamGrads)> {
    check_targets(p, targets)?;
    let (n, k, dt) = (p.n(), p.k(), p.d_t);
    let scale = 1.0 / n as f64;
    let mut g = MdnParamGrads {
        logits: DMatrix::zeros(n, k),
        means: DMatrix::zeros(n, k * dt),
        log_sigmas: DMatrix::zeros(n, k),
    };
    let mut total = 0.0;
    for i in 0..n {
        let terms = p.joint_terms(targets, i);
        let lse = logsumexp(&terms);
        total -= lse;
        for j in 0..k {
            let r = (terms[j] - lse).exp();
            g.logits[(i, j)] = scale * (p.alpha[(i, j)] - r);
            let s = p.sigma[(i, j)];
            let mut sq = 0.0;
            for a in 0..dt {
                let diff = targets[(i, a)] - p.means[(i, j * dt + a)];
                sq += diff * diff;
                g.means[(i, j * dt + a)] = -scale * r * diff / (s * s);
            }
            let d_sigma = r * (dt as f64 / s - sq / (s * s * s));
            g.log_sigmas[(i, j)] = scale * d_sigma * p.log_sigmas[(i, j)].exp();
        }
    }
    Ok((total / n as f64, g))
}

fn check_targets(p: &MdnParams, t: &DMatrix<f64>) -> Result<()> {
    if t.nrows() != p.n() || t.ncols() != p.d_t {
        return Err(Error::DimensionMismatch(format!(
            "targets are {}x{}, parameters describe {}x{}",
            t.nrows(),
            t.ncols(),
            p.n(),
            p.d_t
        )));
    }
    Ok(())
}

/// Shape of a mixture density network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdnConfig {
    pub context_dim: usize,
    pub target_dim: usize,
    /// Width of what the trunk reads. Must equal `context_dim`.
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub sigma_floor: f64,
}

impl MdnConfig {
    pub fn new(context_dim: usize, target_dim: usize, k: usize) -> Self {
        Self { context_dim, target_dim, input_dim: context_dim, hidden: vec![64, 64], k, sigma_floor: DEFAULT_SIGMA_FLOOR }
    }

    /// A network that sees the target could learn `μ(Z) = Z` and shrink
    /// its variance without bound, so only context-width inputs are allowed.
    fn check(&self) -> Result<()> {
        if self.input_dim == self.context_dim + self.target_dim {
            return Err(Error::IdentityCollapse { input: self.input_dim, context: self.context_dim });
        }
        if self.input_dim != self.context_dim {
            return Err(Error::DimensionMismatch(format!(
                "MDN input width {} differs from context width {}",
                self.input_dim, self.context_dim
            )));
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidArgument("MDN trunk needs at least one hidden layer".into()));
        }
        Ok(())
    }
}

/// ReLU trunk on `z_c` followed by an [`MdnHead`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdnRaw", into = "MdnRaw")]
pub struct Mdn {
    config: MdnConfig,
    trunk: Mlp,
    head: MdnHead,
}

#[derive(Clone, Debug)]
pub struct MdnCache {
    trunk: MlpCache,
    features: DMatrix<f64>,
}

/// Loss value, flat parameter gradient and input gradient.
#[derive(Clone, Debug)]
pub struct MdnGradients {
    pub loss: f64,
    pub params: Vec<f64>,
    pub input: DMatrix<f64>,
}

impl Mdn {
    pub fn new<R: Rng + ?Sized>(config: MdnConfig, rng: &mut R) -> Result<Self> {
        config.check()?;
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden);
        let trunk = Mlp::new(&dims, true, rng)?;
        let head = MdnHead::new(*dims.last().expect("nonempty"), config.k, config.target_dim, config.sigma_floor, rng)?;
        Ok(Self { config, trunk, head })
    }

    pub fn from_parts(config: MdnConfig, trunk: Mlp, head: MdnHead) -> Result<Self> {
        config.check()?;
        if trunk.input_dim() != config.input_dim || trunk.output_dim() != head.hidden() || !trunk.final_relu() {
            return Err(Error::DimensionMismatch("trunk and head do not fit together".into()));
        }
        if head.k() != config.k || head.d_t() != config.target_dim {
            return Err(Error::DimensionMismatch("head does not match the configuration".into()));
        }
        Ok(Self { config, trunk, head })
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn head(&self) -> &MdnHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut MdnHead {
        &mut self.head
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.head.param_count()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<(MdnParams, MdnCache)> {
        let (features, trunk) = self.trunk.forward(x)?;
        Ok((self.head.forward(&features), MdnCache { trunk, features }))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<MdnParams> {
        Ok(self.forward(x)?.0)
    }

    /// Backpropagates head-output gradients into flat parameter and input gradients.
    pub fn backward(&self, cache: &MdnCache, g: &MdnParamGrads) -> (Vec<f64>, DMatrix<f64>) {
        let (head_grads, dh) = self.head.backward(&cache.features, g);
        let (trunk_grads, dx) = self.trunk.backward(&cache.trunk, &dh);
        let mut flat = flatten_layers(&trunk_grads);
        flat.extend(flatten_layers(&head_grads));
        (flat, dx)
    }

    /// Mean conditional NLL of `targets` given `x`, with all gradients.
    pub fn nll_gradients(&self, x: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<MdnGradients> {
        let (p, cache) = self.forward(x)?;
        let (loss, g) = mdn_nll_grad(&p, targets)?;
        let (params, input) = self.backward(&cache, &g);
        Ok(MdnGradients { loss, params, input })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.trunk.flatten();
        out.extend(flatten_layers(&self.head.layers().map(|l| l.clone())));
        out
    }

    pub fn unflatten(&mut self, src: &[f64]) -> usize {
        let mut at = self.trunk.unflatten(src);
        for l in self.head.layers_mut() {
            at += l.read_flat(&src[at..]);
        }
        at
    }
}

pub fn mdn_forward(mdn: &Mdn, x: &DMatrix<f64>) -> Result<MdnParams> {
    mdn.predict(x)
}

#[derive(Serialize, Deserialize)]
struct MdnRaw {
    config: MdnConfig,
    trunk: Mlp,
    /// `[logits, means, log_sigmas]` as single-layer networks.
    heads: [Mlp; 3],
}

impl From<Mdn> for MdnRaw {
    fn from(m: Mdn) -> Self {
        let heads = m.head.layers().map(|l| Mlp::from_layers(vec![l.clone()], false).expect("single layer"));
        MdnRaw { config: m.config, trunk: m.trunk, heads }
    }
}

impl TryFrom<MdnRaw> for Mdn {
    type Error = Error;
    fn try_from(r: MdnRaw) -> Result<Self> {
        let [a, b, c] = r.heads;
        let mut head = MdnHead::zeros(r.trunk.output_dim(), r.config.k, r.config.target_dim, r.config.sigma_floor)?;
        for (dst, src) in head.layers_mut().into_iter().zip([a, b, c]) {
            let l = &src.layers()[0];
            if src.layers().len() != 1 || l.w.shape() != dst.w.shape() {
                return Err(Error::DimensionMismatch("MDN head arrays do not match the configuration".into()));
            }
            *dst = l.clone();
        }
        Mdn::from_parts(r.config, r.trunk, head)
    }
}
