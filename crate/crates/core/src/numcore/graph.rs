//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its
//! forward value and the handles of its inputs. [`Graph::backward`]
//! consumes the tape and walks it once in reverse, accumulating
//! `∂loss/∂node` into every node that (transitively) depends on a leaf
//! created with [`Graph::param`]. Constants never receive gradient.
//!
//! Tensors are treated as matrices (`rows × cols`, see
//! [`Tensor::rows`]); that is all the networks here need.

use crate::error::{Error, Result};

use super::activation;
use super::scalar::Scalar;
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Gradient rule for [`Graph::clamp`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClampGrad {
    /// Zero gradient wherever the input was clipped.
    #[default]
    Exact,
    /// Identity gradient everywhere.
    StraightThrough,
}

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Offset(Var),
    Gelu(Var),
    Mish(Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Concat(Vec<Var>),
    Columns(Var, usize),
    Clamp(Var, S, S, ClampGrad),
    Minimum(Var, Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Recorded computation. See the module docs.
#[derive(Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// `None` for nodes the loss does not depend on through any parameter.
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<S>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn same_shape<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn zip_map<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable leaf; receives a gradient on `backward`.
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Detached input; never receives gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// `[m,k] · [k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = (va.rows(), va.cols());
        let (k2, n) = (vb.rows(), vb.cols());
        if k != k2 || vb.shape().len() != 2 {
            return Err(Error::dim(format!(
                "matmul {:?} · {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let mut out = vec![S::zero(); m * n];
        gemm_acc(va.data(), vb.data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Adds a length-`n` vector to every row of an `[m,n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        let n = va.cols();
        if vr.len() != n {
            return Err(Error::dim(format!(
                "add_row {:?} + {:?}",
                va.shape(),
                vr.shape()
            )));
        }
        let mut data = va.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, &b) in chunk.iter_mut().zip(vr.data()) {
                *x = *x + b;
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(S, S) -> S, op: Op<S>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape(va, vb, what)?;
        let value = zip_map(va, vb, f);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum. The gradient goes to `a` on ties.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "minimum", |x, y| if x <= y { x } else { y }, Op::Minimum(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(S) -> S, op: Op<S>) -> Var {
        let value = self.value(a).map(f);
        let ng = self.needs(a);
        self.push(value, op, ng)
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: S) -> Var {
        self.unary(a, |x| x + c, Op::Offset(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -S::one())
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, activation::gelu, Op::Gelu(a))
    }

    pub fn mish(&mut self, a: Var) -> Var {
        self.unary(a, activation::mish, Op::Mish(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, S::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, S::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn clamp(&mut self, a: Var, lo: S, hi: S, grad: ClampGrad) -> Var {
        self.unary(a, |x| x.max(lo).min(hi), Op::Clamp(a, lo, hi, grad))
    }

    /// Concatenate matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).rows(),
            None => return Err(Error::dim("concat of nothing")),
        };
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::dim("concat_cols: row counts differ"));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), ng))
    }

    /// Columns `start..end` of a matrix.
    pub fn columns(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        if start >= end || end > va.cols() {
            return Err(Error::dim(format!(
                "columns {start}..{end} of {:?}",
                va.shape()
            )));
        }
        let rows = va.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for i in 0..rows {
            data.extend_from_slice(&va.row(i)[start..end]);
        }
        let value = Tensor::new(vec![rows, end - start], data)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::Columns(a, start), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let value = Tensor::scalar(va.sum() / S::lit(va.len() as f64));
        let ng = self.needs(a);
        self.push(value, Op::Mean(a), ng)
    }

    /// Consume the tape and return `∂loss/∂v` for every node that needs it.
    pub fn backward(self, loss: Var) -> Result<Gradients<S>> {
        let n = self.nodes.len();
        if loss.0 >= n {
            return Err(Error::contract("loss is not on this tape"));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..n).map(|_| None).collect();
        if !self.nodes[loss.0].needs_grad {
            return Ok(Gradients { grads });
        }
        let loss_shape = self.nodes[loss.0].value.shape().to_vec();
        grads[loss.0] = Some(Tensor::full(&loss_shape, S::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<S>>], v: Var, f: impl FnOnce(&mut [S])) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()));
        f(slot.data_mut());
    }

    fn elementwise(&self, grads: &mut [Option<Tensor<S>>], v: Var, g: &Tensor<S>, f: impl Fn(S, S) -> S) {
        let x = &self.nodes[v.0].value;
        self.accumulate(grads, v, |acc| {
            for ((a, &gi), &xi) in acc.iter_mut().zip(g.data()).zip(x.data()) {
                *a = *a + f(gi, xi);
            }
        });
    }

    fn propagate(&self, idx: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, nn) = (va.rows(), va.cols(), vb.cols());
                self.accumulate(grads, *a, |acc| gemm_nt_acc(g.data(), vb.data(), acc, m, k, nn));
                self.accumulate(grads, *b, |acc| gemm_tn_acc(va.data(), g.data(), acc, m, k, nn));
            }
            Op::AddRow(a, row) => {
                self.elementwise(grads, *a, g, |gi, _| gi);
                let n = g.cols();
                self.accumulate(grads, *row, |acc| {
                    for chunk in g.data().chunks(n) {
                        for (a, &gi) in acc.iter_mut().zip(chunk) {
                            *a = *a + gi;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.elementwise(grads, *a, g, |gi, _| gi);
                self.elementwise(grads, *b, g, |gi, _| gi);
            }
            Op::Sub(a, b) => {
                self.elementwise(grads, *a, g, |gi, _| gi);
                self.elementwise(grads, *b, g, |gi, _| -gi);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |acc| {
                    for ((s, &gi), &y) in acc.iter_mut().zip(g.data()).zip(vb.data()) {
                        *s = *s + gi * y;
                    }
                });
                self.accumulate(grads, *b, |acc| {
                    for ((s, &gi), &x) in acc.iter_mut().zip(g.data()).zip(va.data()) {
                        *s = *s + gi * x;
                    }
                });
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |acc| {
                    for (i, s) in acc.iter_mut().enumerate() {
                        if va.data()[i] <= vb.data()[i] {
                            *s = *s + g.data()[i];
                        }
                    }
                });
                self.accumulate(grads, *b, |acc| {
                    for (i, s) in acc.iter_mut().enumerate() {
                        if va.data()[i] > vb.data()[i] {
                            *s = *s + g.data()[i];
                        }
                    }
                });
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.elementwise(grads, *a, g, |gi, _| gi * c);
            }
            Op::Offset(a) => self.elementwise(grads, *a, g, |gi, _| gi),
            Op::Gelu(a) => self.elementwise(grads, *a, g, |gi, x| gi * activation::gelu_grad(x)),
            Op::Mish(a) => self.elementwise(grads, *a, g, |gi, x| gi * activation::mish_grad(x)),
            Op::Tanh(a) => {
                let y = &node.value;
                self.accumulate(grads, *a, |acc| {
                    for ((s, &gi), &yi) in acc.iter_mut().zip(g.data()).zip(y.data()) {
                        *s = *s + gi * (S::one() - yi * yi);
                    }
                });
            }
            Op::Exp(a) => {
                let y = &node.value;
                self.accumulate(grads, *a, |acc| {
                    for ((s, &gi), &yi) in acc.iter_mut().zip(g.data()).zip(y.data()) {
                        *s = *s + gi * yi;
                    }
                });
            }
            Op::Square(a) => self.elementwise(grads, *a, g, |gi, x| gi * (x + x)),
            Op::Clamp(a, lo, hi, rule) => {
                let (lo, hi) = (*lo, *hi);
                match rule {
                    ClampGrad::StraightThrough => self.elementwise(grads, *a, g, |gi, _| gi),
                    ClampGrad::Exact => self.elementwise(grads, *a, g, |gi, x| {
                        if x >= lo && x <= hi {
                            gi
                        } else {
                            S::zero()
                        }
                    }),
                }
            }
            Op::Concat(parts) => {
                let total = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    self.accumulate(grads, p, |acc| {
                        for (i, row) in acc.chunks_mut(w).enumerate() {
                            let src = &g.data()[i * total + offset..i * total + offset + w];
                            for (s, &gi) in row.iter_mut().zip(src) {
                                *s = *s + gi;
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Columns(a, start) => {
                let (w, total) = (g.cols(), self.value(*a).cols());
                let start = *start;
                self.accumulate(grads, *a, |acc| {
                    for (i, row) in g.data().chunks(w).enumerate() {
                        for (j, &gi) in row.iter().enumerate() {
                            let s = &mut acc[i * total + start + j];
                            *s = *s + gi;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gi = g.data()[0];
                self.accumulate(grads, *a, |acc| acc.iter_mut().for_each(|s| *s = *s + gi));
            }
            Op::Mean(a) => {
                let len = S::lit(self.value(*a).len() as f64);
                let gi = g.data()[0] / len;
                self.accumulate(grads, *a, |acc| acc.iter_mut().for_each(|s| *s = *s + gi));
            }
        }
    }
}
