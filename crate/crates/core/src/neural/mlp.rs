use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map `Y = X W + b` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: DMatrix::zeros(fan_in, fan_out), b: DVector::zeros(fan_out) }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-a..a));
        Self { w, b: DVector::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x * &self.w;
        for mut row in y.row_iter_mut() {
            row += self.b.transpose();
        }
        y
    }

    /// Gradients for `W`, `b` and the layer input given `dL/dY`.
    pub fn backward(&self, x: &DMatrix<f64>, dy: &DMatrix<f64>) -> (Layer, DMatrix<f64>) {
        let dw = x.tr_mul(dy);
        let db = dy.row_sum().transpose();
        let dx = dy * self.w.transpose();
        (Layer { w: dw, b: db }, dx)
    }

    /// Row-major weights followed by the bias.
    pub(crate) fn push_flat(&self, out: &mut Vec<f64>) {
        for i in 0..self.w.nrows() {
            for j in 0..self.w.ncols() {
                out.push(self.w[(i, j)]);
            }
        }
        out.extend(self.b.iter());
    }

    pub(crate) fn read_flat(&mut self, src: &[f64]) -> usize {
        let (r, c) = self.w.shape();
        for i in 0..r {
            for j in 0..c {
                self.w[(i, j)] = src[i * c + j];
            }
        }
        for j in 0..c {
            self.b[j] = src[r * c + j];
        }
        r * c + c
    }
}

/// Affine layers joined by ReLU. The last layer is linear unless
/// `final_relu` is set, which is how the mixture-density trunk is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRaw", into = "MlpRaw")]
pub struct Mlp {
    layers: Vec<Layer>,
    final_relu: bool,
}

/// Everything backprop needs from one forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(dims: &[usize], final_relu: bool, rng: &mut R) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims.windows(2).map(|w| Layer::glorot(w[0], w[1], rng)).collect();
        Ok(Self { layers, final_relu })
    }

    pub fn zeros(dims: &[usize], final_relu: bool) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self { layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(), final_relu })
    }

    pub fn from_layers(layers: Vec<Layer>, final_relu: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.fan_out() {
                return Err(Error::DimensionMismatch(format!("layer {i}: bias length {} vs {} outputs", l.b.len(), l.fan_out())));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    w[0].fan_out(),
                    i + 1,
                    w[1].fan_in()
                )));
            }
        }
        Ok(Self { layers, final_relu })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn final_relu(&self) -> bool {
        self.final_relu
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].fan_in()];
        d.extend(self.layers.iter().map(|l| l.fan_out()));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn activated(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.final_relu
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, MlpCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!("input has {} columns, network expects {}", x.ncols(), self.input_dim())));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let a = layer.forward(&h);
            inputs.push(h);
            h = if self.activated(i) { a.map(|v| v.max(0.0)) } else { a.clone() };
            pre.push(a);
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients and `dL/dX` from `dL/d(output)`.
    pub fn backward(&self, cache: &MlpCache, grad_output: &DMatrix<f64>) -> (Vec<Layer>, DMatrix<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for i in (0..self.layers.len()).rev() {
            if self.activated(i) {
                g.zip_apply(&cache.pre[i], |gv, a| {
                    if a <= 0.0 {
                        *gv = 0.0
                    }
                });
            }
            let (lg, dx) = self.layers[i].backward(&cache.inputs[i], &g);
            grads.push(lg);
            g = dx;
        }
        grads.reverse();
        (grads, g)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            l.push_flat(&mut out);
        }
        out
    }

    /// Reads parameters in [`flatten`](Self::flatten) order; returns how many were consumed.
    pub fn unflatten(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for l in &mut self.layers {
            at += l.read_flat(&src[at..]);
        }
        at
    }
}

/// Flattens per-layer gradients in the same order as [`Mlp::flatten`].
pub fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        l.push_flat(&mut out);
    }
    out
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("layer widths must be positive and at least two, got {dims:?}")));
    }
    Ok(())
}

pub fn mlp_forward(net: &Mlp, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, MlpCache)> {
    net.forward(x)
}

pub fn mlp_backward(net: &Mlp, cache: &MlpCache, grad_output: &DMatrix<f64>) -> Vec<Layer> {
    net.backward(cache, grad_output).0
}

/// JSON form: widths, activation flag, and one row-major weight array plus
/// bias per layer.
#[derive(Serialize, Deserialize)]
struct MlpRaw {
    dims: Vec<usize>,
    final_relu: bool,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<Mlp> for MlpRaw {
    fn from(m: Mlp) -> Self {
        MlpRaw {
            dims: m.dims(),
            final_relu: m.final_relu,
            weights: m.layers.iter().map(|l| crate::gaussian::row_major(&l.w)).collect(),
            biases: m.layers.iter().map(|l| l.b.as_slice().to_vec()).collect(),
        }
    }
}

impl TryFrom<MlpRaw> for Mlp {
    type Error = Error;
    fn try_from(r: MlpRaw) -> Result<Self> {
        check_dims(&r.dims)?;
        if r.weights.len() != r.dims.len() - 1 || r.biases.len() != r.weights.len() {
            return Err(Error::DimensionMismatch("one weight array and bias per layer required".into()));
        }
        let mut layers = Vec::new();
        for (i, w) in r.dims.windows(2).enumerate() {
            if r.weights[i].len() != w[0] * w[1] || r.biases[i].len() != w[1] {
                return Err(Error::DimensionMismatch(format!("layer {i} arrays do not match widths {w:?}")));
            }
            layers.push(Layer {
                w: DMatrix::from_row_slice(w[0], w[1], &r.weights[i]),
                b: DVector::from_vec(r.biases[i].clone()),
            });
        }
        Mlp::from_layers(layers, r.final_relu)
    }
}
