//! Layers: fully connected, batch normalization, polynomial graph
//! convolution and a stacked LSTM.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{glorot_uniform, ParamId, ParamStore};
use super::tape::{sigmoid, softmax_rows, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn apply(self, t: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => t.relu(x),
            Activation::Elu => t.elu(x),
            Activation::Sigmoid => t.sigmoid(x),
            Activation::Tanh => t.tanh(x),
            Activation::Softmax => t.softmax(x),
        }
    }

    pub fn apply_array(self, x: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.mapv(|v| v.max(0.0)),
            Activation::Elu => x.mapv(|v| if v > 0.0 { v } else { v.exp_m1() }),
            Activation::Sigmoid => x.mapv(sigmoid),
            Activation::Tanh => x.mapv(f64::tanh),
            Activation::Softmax => softmax_rows(&x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `f(x W + b)` with `W: in×out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), glorot_uniform(in_dim, out_dim, rng));
        let b = store.add(&format!("{name}.b"), Array2::zeros((1, out_dim)));
        Linear {
            w,
            b,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn forward(&self, t: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = t.param(store, self.w);
        let b = t.param(store, self.b);
        let h = t.matmul(x, w)?;
        let h = t.add_row(h, b)?;
        self.activation.apply(t, h)
    }
}

/// Per-feature batch normalization with learned scale and shift. Running
/// statistics follow `r <- momentum * r + (1 - momentum) * batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub dim: usize,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        BatchNorm {
            gamma: store.add(&format!("{name}.gamma"), Array2::ones((1, dim))),
            beta: store.add(&format!("{name}.beta"), Array2::zeros((1, dim))),
            running_mean: store.add_buffer(&format!("{name}.running_mean"), Array2::zeros((1, dim))),
            running_var: store.add_buffer(&format!("{name}.running_var"), Array2::ones((1, dim))),
            dim,
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    /// Train mode normalizes with batch statistics and updates the running
    /// buffers; eval mode reads the buffers only.
    pub fn forward(&self, t: &mut Tape, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let width = t.shape(x).1;
        if width != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: width,
            });
        }
        let normalized = match mode {
            Mode::Train => {
                let n = t.shape(x).0;
                let (xh, mean, var) = t.batch_norm(x, self.eps)?;
                // running variance is unbiased when more than one row is seen
                let correction = if n > 1 { n as f64 / (n as f64 - 1.0) } else { 1.0 };
                let m = self.momentum;
                let rm = store.get_mut(self.running_mean);
                rm.zip_mut_with(&mean.insert_axis(ndarray::Axis(0)), |r, &b| *r = m * *r + (1.0 - m) * b);
                let rv = store.get_mut(self.running_var);
                rv.zip_mut_with(&var.insert_axis(ndarray::Axis(0)), |r, &b| {
                    *r = m * *r + (1.0 - m) * b * correction
                });
                xh
            }
            Mode::Eval => return self.forward_eval(t, store, x),
        };
        self.affine(t, store, normalized)
    }

    /// Eval-mode forward that only reads the running statistics.
    pub fn forward_eval(&self, t: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let width = t.shape(x).1;
        if width != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: width,
            });
        }
        let shift = t.constant(-store.get(self.running_mean));
        let scale = t.constant(store.get(self.running_var).mapv(|v| 1.0 / (v + self.eps).sqrt()));
        let centered = t.add_row(x, shift)?;
        let normalized = t.mul_row(centered, scale)?;
        self.affine(t, store, normalized)
    }

    fn affine(&self, t: &mut Tape, store: &ParamStore, normalized: Var) -> Result<Var> {
        let gamma = t.param(store, self.gamma);
        let beta = t.param(store, self.beta);
        let y = t.mul_row(normalized, gamma)?;
        t.add_row(y, beta)
    }
}

/// `f(sum_{k<K} L^k H theta_k)` for a graph signal `H: m×c_in` and
/// coefficient matrices `theta_k: c_in×c_out`. Powers are applied to `H`
/// by repeated multiplication.
pub fn gcn_forward(
    h: &Array2<f64>,
    laplacian: &Array2<f64>,
    thetas: &[Array2<f64>],
    activation: Activation,
) -> Result<Array2<f64>> {
    let m = laplacian.nrows();
    if laplacian.ncols() != m || h.nrows() != m {
        return Err(Error::ShapeMismatch {
            op: "gcn_forward",
            lhs: laplacian.dim(),
            rhs: h.dim(),
        });
    }
    let Some(first) = thetas.first() else {
        return Err(Error::EmptySequence);
    };
    for th in thetas {
        if th.nrows() != h.ncols() || th.dim() != first.dim() {
            return Err(Error::ShapeMismatch {
                op: "gcn_forward",
                lhs: h.dim(),
                rhs: th.dim(),
            });
        }
    }
    let mut power = h.clone();
    let mut out = power.dot(first);
    for th in &thetas[1..] {
        power = laplacian.dot(&power);
        out += &power.dot(th);
    }
    Ok(activation.apply_array(out))
}

/// Batched single-channel graph convolution. Each input row is one sample's
/// signal over the `m` graph nodes and each `theta_k` is a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConv {
    pub thetas: Vec<ParamId>,
    /// Transposed Laplacian, so a row signal `x` maps to `(L x^T)^T = x L^T`.
    laplacian_t: Array2<f64>,
    pub activation: Activation,
}

impl GraphConv {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        laplacian: &Array2<f64>,
        order: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if laplacian.nrows() != laplacian.ncols() {
            return Err(Error::ShapeMismatch {
                op: "graph_conv",
                lhs: laplacian.dim(),
                rhs: laplacian.dim(),
            });
        }
        if order == 0 {
            return Err(Error::InvalidConfig("graph convolution order must be >= 1".into()));
        }
        let thetas = (0..order)
            .map(|k| store.add(&format!("{name}.theta{k}"), glorot_uniform(1, 1, rng)))
            .collect();
        Ok(GraphConv {
            thetas,
            laplacian_t: laplacian.t().to_owned(),
            activation,
        })
    }

    pub fn nodes(&self) -> usize {
        self.laplacian_t.nrows()
    }

    pub fn forward(&self, t: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let width = t.shape(x).1;
        if width != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                actual: width,
            });
        }
        let lt = t.constant(self.laplacian_t.clone());
        let mut power = x;
        let th0 = t.param(store, self.thetas[0]);
        let mut out = t.scale_by(power, th0)?;
        for &id in &self.thetas[1..] {
            power = t.matmul(power, lt)?;
            let th = t.param(store, id);
            let term = t.scale_by(power, th)?;
            out = t.add(out, term)?;
        }
        self.activation.apply(t, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// Input weights `in×4h`, gate blocks ordered input, forget, candidate, output.
    pub w: ParamId,
    /// Recurrent weights `h×4h`.
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
}

/// Stacked LSTM returning the top layer's final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        n_layers: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let in_dim = if l == 0 { input } else { hidden };
                let mut bias = Array2::zeros((1, 4 * hidden));
                bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
                LstmLayer {
                    w: store.add(&format!("{name}.l{l}.w"), glorot_uniform(in_dim, 4 * hidden, rng)),
                    u: store.add(&format!("{name}.l{l}.u"), glorot_uniform(hidden, 4 * hidden, rng)),
                    b: store.add(&format!("{name}.l{l}.b"), bias),
                    input: in_dim,
                }
            })
            .collect();
        Lstm { layers, hidden }
    }

    pub fn forward(&self, t: &mut Tape, store: &ParamStore, seq: &[Var]) -> Result<Var> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let n = t.shape(seq[0]).0;
        let h = self.hidden;
        let mut inputs = seq.to_vec();
        for layer in &self.layers {
            let w = t.param(store, layer.w);
            let u = t.param(store, layer.u);
            let b = t.param(store, layer.b);
            let mut hs = t.constant(Array2::zeros((n, h)));
            let mut cs = t.constant(Array2::zeros((n, h)));
            let mut outputs = Vec::with_capacity(inputs.len());
            for &x in &inputs {
                let zx = t.matmul(x, w)?;
                let zh = t.matmul(hs, u)?;
                let z = t.add(zx, zh)?;
                let z = t.add_row(z, b)?;
                let i = t.slice_cols(z, 0, h)?;
                let i = t.sigmoid(i)?;
                let f = t.slice_cols(z, h, 2 * h)?;
                let f = t.sigmoid(f)?;
                let g = t.slice_cols(z, 2 * h, 3 * h)?;
                let g = t.tanh(g)?;
                let o = t.slice_cols(z, 3 * h, 4 * h)?;
                let o = t.sigmoid(o)?;
                let keep = t.mul(f, cs)?;
                let write = t.mul(i, g)?;
                cs = t.add(keep, write)?;
                let squashed = t.tanh(cs)?;
                hs = t.mul(o, squashed)?;
                outputs.push(hs);
            }
            inputs = outputs;
        }
        Ok(*inputs.last().expect("nonempty sequence"))
    }
}
