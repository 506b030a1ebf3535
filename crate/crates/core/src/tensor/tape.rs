//! Reverse-mode differentiation over an append-only tape.
//!
//! Every operation on a [`Var`] evaluates eagerly and appends one node to its
//! [`Tape`]. Because nodes only reference earlier nodes, the tape order is a
//! topological order and the backward pass is a single reverse sweep.
//! A tape is confined to one thread (`RefCell`, not `Sync`).

use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use super::{kernels, Tensor, LOG_CLAMP};
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Relu(usize),
    Exp(usize),
    LnClamped(usize),
    Sum(usize),
    Mean(usize),
    Softmax(usize),
    SelectCols(usize, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an input. Gradients can be requested for any leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            index: nodes.len() - 1,
        }
    }

    fn unary(&self, a: usize, f: impl FnOnce(&Tensor) -> Result<Tensor>, op: Op) -> Result<Var<'_>> {
        let value = f(&self.nodes.borrow()[a].value)?;
        Ok(self.push(value, op))
    }

    fn binary(
        &self,
        a: usize,
        b: usize,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>,
        op: Op,
    ) -> Result<Var<'_>> {
        let value = {
            let nodes = self.nodes.borrow();
            f(&nodes[a].value, &nodes[b].value)?
        };
        Ok(self.push(value, op))
    }
}

fn zip_same(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    a.same_shape(b)?;
    Tensor::new(
        a.shape(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.index].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.index].value.shape().to_vec()
    }

    /// Value of a scalar node.
    pub fn item(&self) -> Result<f64> {
        self.tape.nodes.borrow()[self.index].value.item()
    }

    fn same_tape(&self, other: &Var<'t>) -> Result<()> {
        if core::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(Error::NotInGraph)
        }
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.index,
            other.index,
            |a, b| zip_same(a, b, |x, y| x + y),
            Op::Add(self.index, other.index),
        )
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.index,
            other.index,
            |a, b| zip_same(a, b, |x, y| x - y),
            Op::Sub(self.index, other.index),
        )
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.index,
            other.index,
            |a, b| zip_same(a, b, |x, y| x * y),
            Op::Mul(self.index, other.index),
        )
    }

    pub fn scale(self, factor: f64) -> Result<Var<'t>> {
        self.tape
            .unary(self.index, |a| Ok(a.map(|v| v * factor)), Op::Scale(self.index, factor))
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape
            .binary(self.index, other.index, kernels::matmul, Op::MatMul(self.index, other.index))
    }

    /// Adds a `[m]` bias to every row of a `[n, m]` matrix.
    pub fn add_bias(self, bias: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&bias)?;
        self.tape
            .binary(self.index, bias.index, kernels::add_bias, Op::AddBias(self.index, bias.index))
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.tape
            .unary(self.index, |a| Ok(kernels::relu(a)), Op::Relu(self.index))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.tape
            .unary(self.index, |a| Ok(a.map(libm::exp)), Op::Exp(self.index))
    }

    /// `ln(max(x, 1e-12))`. This is the only place a log is clamped.
    pub fn ln_clamped(self) -> Result<Var<'t>> {
        self.tape.unary(
            self.index,
            |a| Ok(a.map(|v| libm::log(v.max(LOG_CLAMP)))),
            Op::LnClamped(self.index),
        )
    }

    pub fn sum(self) -> Result<Var<'t>> {
        self.tape.unary(
            self.index,
            |a| Ok(Tensor::scalar(a.data().iter().sum())),
            Op::Sum(self.index),
        )
    }

    pub fn mean(self) -> Result<Var<'t>> {
        self.tape.unary(
            self.index,
            |a| {
                if a.is_empty() {
                    return Err(Error::Empty("tensor"));
                }
                Ok(Tensor::scalar(a.data().iter().sum::<f64>() / a.len() as f64))
            },
            Op::Mean(self.index),
        )
    }

    /// Max-stable softmax along the last axis.
    pub fn softmax(self) -> Result<Var<'t>> {
        self.tape
            .unary(self.index, |a| Ok(kernels::softmax_rows(a)), Op::Softmax(self.index))
    }

    /// Columns `start..end` of a `[n, m]` matrix.
    pub fn select_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        self.tape.unary(
            self.index,
            |a| kernels::select_cols(a, start, end),
            Op::SelectCols(self.index, start, end),
        )
    }
}

/// Gradients of the scalar `loss` with respect to each tensor in `wrt`.
///
/// Forward values are left untouched; calling this twice gives identical
/// results.
pub fn grad<'t>(loss: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Tensor>> {
    let nodes = loss.tape.nodes.borrow();
    let root = &nodes[loss.index].value;
    if !root.is_scalar() {
        return Err(Error::NonScalarLoss(root.shape().to_vec()));
    }
    for w in wrt {
        w.same_tape(&loss)?;
    }

    let n = loss.index + 1;
    let mut reach = vec![false; n];
    reach[loss.index] = true;
    for i in (0..n).rev() {
        if !reach[i] {
            continue;
        }
        for p in parents(&nodes[i].op) {
            reach[p] = true;
        }
    }
    if wrt.iter().any(|w| w.index >= n || !reach[w.index]) {
        return Err(Error::NotInGraph);
    }

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
    grads[loss.index] = Some(vec![1.0]);
    for i in (0..n).rev() {
        let Some(g) = grads[i].take() else { continue };
        backprop(&nodes, i, &g, &mut grads);
        grads[i] = Some(g);
    }

    Ok(wrt
        .iter()
        .map(|w| {
            let shape = nodes[w.index].value.shape();
            match &grads[w.index] {
                Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
                None => Tensor::zeros(shape),
            }
        })
        .collect())
}

fn parents(op: &Op) -> impl Iterator<Item = usize> {
    let (a, b) = match *op {
        Op::Leaf => (None, None),
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::AddBias(a, b) => {
            (Some(a), Some(b))
        }
        Op::Scale(a, _)
        | Op::Relu(a)
        | Op::Exp(a)
        | Op::LnClamped(a)
        | Op::Sum(a)
        | Op::Mean(a)
        | Op::Softmax(a)
        | Op::SelectCols(a, _, _) => (Some(a), None),
    };
    a.into_iter().chain(b)
}

fn accumulate(grads: &mut [Option<Vec<f64>>], index: usize, delta: impl Iterator<Item = f64>) {
    match &mut grads[index] {
        Some(g) => {
            for (acc, d) in g.iter_mut().zip(delta) {
                *acc += d;
            }
        }
        slot @ None => *slot = Some(delta.collect()),
    }
}

fn backprop(nodes: &[Node], i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = &nodes[i].value;
    match nodes[i].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(grads, a, g.iter().copied());
            accumulate(grads, b, g.iter().copied());
        }
        Op::Sub(a, b) => {
            accumulate(grads, a, g.iter().copied());
            accumulate(grads, b, g.iter().map(|v| -v));
        }
        Op::Mul(a, b) => {
            let (av, bv) = (nodes[a].value.data(), nodes[b].value.data());
            accumulate(grads, a, g.iter().zip(bv).map(|(d, y)| d * y));
            accumulate(grads, b, g.iter().zip(av).map(|(d, x)| d * x));
        }
        Op::Scale(a, c) => accumulate(grads, a, g.iter().map(|d| d * c)),
        Op::MatMul(a, b) => {
            let gt = Tensor::new(out.shape(), g.to_vec()).expect("gradient shape");
            let da = kernels::matmul_a_bt(&gt, &nodes[b].value);
            let db = kernels::matmul_at_b(&nodes[a].value, &gt);
            accumulate(grads, a, da.into_data().into_iter());
            accumulate(grads, b, db.into_data().into_iter());
        }
        Op::AddBias(a, b) => {
            accumulate(grads, a, g.iter().copied());
            let m = nodes[b].value.len();
            let mut db = vec![0.0; m];
            for row in g.chunks(m.max(1)) {
                for (acc, d) in db.iter_mut().zip(row) {
                    *acc += d;
                }
            }
            accumulate(grads, b, db.into_iter());
        }
        Op::Relu(a) => {
            let x = nodes[a].value.data();
            accumulate(grads, a, g.iter().zip(x).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 }));
        }
        Op::Exp(a) => accumulate(grads, a, g.iter().zip(out.data()).map(|(d, y)| d * y)),
        Op::LnClamped(a) => {
            let x = nodes[a].value.data();
            accumulate(
                grads,
                a,
                g.iter()
                    .zip(x)
                    .map(|(d, &v)| if v > LOG_CLAMP { d / v } else { 0.0 }),
            );
        }
        Op::Sum(a) => {
            let len = nodes[a].value.len();
            accumulate(grads, a, core::iter::repeat_n(g[0], len));
        }
        Op::Mean(a) => {
            let len = nodes[a].value.len();
            let d = g[0] / len as f64;
            accumulate(grads, a, core::iter::repeat_n(d, len));
        }
        Op::Softmax(a) => {
            let w = out.cols().max(1);
            let mut da = Vec::with_capacity(out.len());
            for (s, d) in out.data().chunks(w).zip(g.chunks(w)) {
                let dot: f64 = s.iter().zip(d).map(|(x, y)| x * y).sum();
                da.extend(s.iter().zip(d).map(|(x, y)| x * (y - dot)));
            }
            accumulate(grads, a, da.into_iter());
        }
        Op::SelectCols(a, start, end) => {
            let src = &nodes[a].value;
            let m = src.cols();
            let width = end - start;
            let mut da = vec![0.0; src.len()];
            for (r, row) in g.chunks(width.max(1)).enumerate().take(src.rows()) {
                da[r * m + start..r * m + end].copy_from_slice(&row[..width]);
            }
            accumulate(grads, a, da.into_iter());
        }
    }
}
