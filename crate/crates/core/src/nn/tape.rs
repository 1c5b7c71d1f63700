//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! Every operation appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse once, accumulating gradients only into nodes
//! that depend on a gradient-carrying leaf.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array1, Array2, Axis};

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    ScaleBy(usize, usize),
    Relu(usize),
    Elu(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    SumCols(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    BatchNorm { x: usize, inv_std: Array1<f64> },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Array2<f64>>>,
    params: BTreeMap<ParamId, Array2<f64>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Gradient for a parameter, summed over every use on the tape.
    pub fn param(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.params.get(&id)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

fn rowsum(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(1)).insert_axis(Axis(1))
}

fn colsum(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::DetachedTensor(v.idx));
        }
        Ok(v.idx)
    }

    /// Forward value of `v`. Panics if `v` belongs to another tape.
    pub fn value(&self, v: Var) -> &Array2<f64> {
        let i = self.idx(v).expect("variable belongs to another tape");
        &self.nodes[i].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.idx(v).map(|i| self.nodes[i].grad).unwrap_or(false)
    }

    fn push(&mut self, value: Array2<f64>, op: Op, grad: bool) -> Var {
        self.nodes.push(Node { value, op, grad });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    /// A leaf that receives gradients.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Copies a parameter onto the tape. Its gradient is reported per id.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let grad = store.is_trainable(id);
        self.push(store.get(id).clone(), Op::Param(id), grad)
    }

    fn unary(&mut self, a: Var, f: impl FnOnce(&Array2<f64>) -> Array2<f64>, op: fn(usize) -> Op) -> Result<Var> {
        let i = self.idx(a)?;
        let value = f(&self.nodes[i].value);
        let grad = self.nodes[i].grad;
        Ok(self.push(value, op(i), grad))
    }

    fn binary_same(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl FnOnce(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var> {
        let (i, j) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.nodes[i].value, &self.nodes[j].value);
        if va.dim() != vb.dim() {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: shape(va),
                rhs: shape(vb),
            });
        }
        let value = f(va, vb);
        let grad = self.nodes[i].grad || self.nodes[j].grad;
        Ok(self.push(value, op(i, j), grad))
    }

    fn binary_row(
        &mut self,
        name: &'static str,
        a: Var,
        row: Var,
        f: impl FnOnce(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var> {
        let (i, j) = (self.idx(a)?, self.idx(row)?);
        let (va, vr) = (&self.nodes[i].value, &self.nodes[j].value);
        if vr.nrows() != 1 || vr.ncols() != va.ncols() {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: shape(va),
                rhs: shape(vr),
            });
        }
        let value = f(va, vr);
        let grad = self.nodes[i].grad || self.nodes[j].grad;
        Ok(self.push(value, op(i, j), grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (i, j) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.nodes[i].value, &self.nodes[j].value);
        if va.ncols() != vb.nrows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: shape(va),
                rhs: shape(vb),
            });
        }
        let value = va.dot(vb);
        let grad = self.nodes[i].grad || self.nodes[j].grad;
        Ok(self.push(value, Op::MatMul(i, j), grad))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("sub", a, b, |x, y| x - y, Op::Sub)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Adds a `1×n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.binary_row("add_row", a, row, |x, r| x + r, Op::AddRow)
    }

    /// Multiplies every row of `a` elementwise by a `1×n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.binary_row("mul_row", a, row, |x, r| x * r, Op::MulRow)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let i = self.idx(a)?;
        let value = &self.nodes[i].value * c;
        let grad = self.nodes[i].grad;
        Ok(self.push(value, Op::Scale(i, c), grad))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| x + c, Op::AddScalar)
    }

    /// Multiplies `a` by the single entry of the `1×1` variable `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let (i, j) = (self.idx(a)?, self.idx(s)?);
        let vs = &self.nodes[j].value;
        if vs.dim() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "scale_by",
                lhs: shape(&self.nodes[i].value),
                rhs: shape(vs),
            });
        }
        let value = &self.nodes[i].value * vs[[0, 0]];
        let grad = self.nodes[i].grad || self.nodes[j].grad;
        Ok(self.push(value, Op::ScaleBy(i, j), grad))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(|v| v.max(0.0)), Op::Relu)
    }

    /// ELU with unit scale: `x` for `x > 0`, `exp(x) - 1` otherwise.
    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(|v| if v > 0.0 { v } else { v.exp_m1() }), Op::Elu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(sigmoid), Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(f64::tanh), Op::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(f64::exp), Op::Exp)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.mapv(|v| v * v), Op::Square)
    }

    /// Sum of all entries as a `1×1` value.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| Array2::from_elem((1, 1), x.sum()), Op::Sum)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.unary(
            a,
            |x| Array2::from_elem((1, 1), x.sum() / x.len().max(1) as f64),
            Op::Mean,
        )
    }

    /// Per-row sums as an `n×1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        self.unary(a, rowsum, Op::SumCols)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.unary(a, softmax_rows, Op::Softmax)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.unary(
            a,
            |x| {
                let mut out = x.clone();
                for mut row in out.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    row.mapv_inplace(|v| v - lse);
                }
                out
            },
            Op::LogSoftmax,
        )
    }

    /// Concatenates along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx: Vec<usize> = parts.iter().map(|&v| self.idx(v)).collect::<Result<_>>()?;
        let Some(&first) = idx.first() else {
            return Err(Error::EmptySequence);
        };
        let rows = self.nodes[first].value.nrows();
        for &i in &idx {
            if self.nodes[i].value.nrows() != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: shape(&self.nodes[first].value),
                    rhs: shape(&self.nodes[i].value),
                });
            }
        }
        let views: Vec<_> = idx.iter().map(|&i| self.nodes[i].value.view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let grad = idx.iter().any(|&i| self.nodes[i].grad);
        Ok(self.push(value, Op::Concat(idx), grad))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let i = self.idx(a)?;
        let va = &self.nodes[i].value;
        if start >= end || end > va.ncols() {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                lhs: shape(va),
                rhs: (start, end),
            });
        }
        let value = va.slice(s![.., start..end]).to_owned();
        let grad = self.nodes[i].grad;
        Ok(self.push(value, Op::Slice(i, start), grad))
    }

    /// Training-mode batch normalization without the affine part. Returns
    /// the normalized values with the batch mean and biased variance.
    pub fn batch_norm(&mut self, a: Var, eps: f64) -> Result<(Var, Array1<f64>, Array1<f64>)> {
        let i = self.idx(a)?;
        let x = &self.nodes[i].value;
        if x.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        let mean = x.mean_axis(Axis(0)).expect("nonempty batch");
        let centered = x - &mean;
        let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty batch");
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let value = centered * &inv_std;
        let grad = self.nodes[i].grad;
        let out = self.push(value, Op::BatchNorm { x: i, inv_std }, grad);
        Ok((out, mean, var))
    }

    /// Reverse pass from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.idx(loss)?;
        let lv = &self.nodes[li].value;
        if lv.dim() != (1, 1) {
            return Err(Error::NotScalarLoss(lv.dim()));
        }
        if !self.nodes[li].grad {
            return Err(Error::DetachedTensor(li));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; li + 1];
        grads[li] = Some(Array2::ones((1, 1)));
        let mut params: BTreeMap<ParamId, Array2<f64>> = BTreeMap::new();
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Op::Param(id) = self.nodes[i].op {
                params
                    .entry(id)
                    .and_modify(|acc| *acc += &g)
                    .or_insert_with(|| g.clone());
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            params,
        })
    }

    fn propagate(&self, i: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        let mut acc = |j: usize, delta: Array2<f64>| {
            if !self.nodes[j].grad {
                return;
            }
            match &mut grads[j] {
                Some(x) => *x += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if self.nodes[*a].grad {
                    acc(*a, g.dot(&val(*b).t()));
                }
                if self.nodes[*b].grad {
                    acc(*b, val(*a).t().dot(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, r) => {
                acc(*a, g.clone());
                acc(*r, colsum(g));
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                acc(*a, g * val(*b));
                acc(*b, g * val(*a));
            }
            Op::MulRow(a, r) => {
                acc(*a, g * val(*r));
                acc(*r, colsum(&(g * val(*a))));
            }
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::ScaleBy(a, s) => {
                acc(*a, g * val(*s)[[0, 0]]);
                acc(*s, Array2::from_elem((1, 1), (g * val(*a)).sum()));
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                d.zip_mut_with(val(*a), |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(*a, d);
            }
            Op::Elu(a) => {
                let mut d = g.clone();
                ndarray::Zip::from(&mut d)
                    .and(val(*a))
                    .and(&node.value)
                    .for_each(|d, &x, &y| {
                        if x <= 0.0 {
                            *d *= y + 1.0
                        }
                    });
                acc(*a, d);
            }
            Op::Sigmoid(a) => acc(*a, g * &node.value.mapv(|y| y * (1.0 - y))),
            Op::Tanh(a) => acc(*a, g * &node.value.mapv(|y| 1.0 - y * y)),
            Op::Exp(a) => acc(*a, g * &node.value),
            Op::Square(a) => acc(*a, g * &val(*a).mapv(|x| 2.0 * x)),
            Op::Sum(a) => acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
            Op::Mean(a) => {
                let n = val(*a).len().max(1) as f64;
                acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]] / n));
            }
            Op::SumCols(a) => {
                let cols = val(*a).ncols();
                acc(*a, Array2::from_shape_fn((g.nrows(), cols), |(r, _)| g[[r, 0]]));
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let dot = rowsum(&(g * y));
                acc(*a, y * &(g - &dot));
            }
            Op::LogSoftmax(a) => {
                let sm = node.value.mapv(f64::exp);
                acc(*a, g - &(sm * &rowsum(g)));
            }
            Op::Concat(parts) => {
                let mut at = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    acc(p, g.slice(s![.., at..at + w]).to_owned());
                    at += w;
                }
            }
            Op::Slice(a, start) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, d);
            }
            Op::BatchNorm { x, inv_std } => {
                let y = &node.value;
                let n = y.nrows() as f64;
                let sum_g = colsum(g);
                let sum_gy = colsum(&(g * y));
                let d = (g * n - &sum_g - &(y * &sum_gy)) * inv_std / n;
                acc(*x, d);
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    out
}
