//! Raw forward kernels shared by the tape and the tape-free inference path,
//! so both produce bit-identical values.

use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Result};

/// `[n, k] x [k, m] -> [n, m]`.
///
/// Every output entry is accumulated over `k` in ascending order, so adding
/// columns to `b` never changes the existing output columns.
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    let (n, k, m) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = ad[i * k + p];
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(&[n, m], out)
}

/// `a^T b` for `a: [n, k]`, `b: [n, m]`.
pub(crate) fn matmul_at_b(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; k * m];
    for i in 0..n {
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(&bd[i * m..(i + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    Tensor {
        shape: vec![k, m],
        data: out,
    }
}

/// `a b^T` for `a: [n, m]`, `b: [k, m]`.
pub(crate) fn matmul_a_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, m, k) = (a.shape()[0], a.shape()[1], b.shape()[0]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let arow = &ad[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &bd[p * m..(p + 1) * m];
            out[i * k + p] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Tensor {
        shape: vec![n, k],
        data: out,
    }
}

/// Adds a `[m]` bias to every row of `[n, m]`.
pub(crate) fn add_bias(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || bias.rank() != 1 || a.shape()[1] != bias.shape()[0] {
        return Err(Error::shape(a.shape(), bias.shape()));
    }
    let m = bias.len();
    let mut out = a.clone();
    for row in out.data.chunks_mut(m.max(1)) {
        for (o, &b) in row.iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Ok(out)
}

pub(crate) fn relu(a: &Tensor) -> Tensor {
    a.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Softmax along the last axis with max subtraction.
pub(crate) fn softmax_rows(a: &Tensor) -> Tensor {
    let w = a.cols().max(1);
    let mut out = a.clone();
    for row in out.data.chunks_mut(w) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Copies columns `start..end` of `[n, m]`.
pub(crate) fn select_cols(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    if a.rank() != 2 || start > end || end > a.shape()[1] {
        return Err(Error::shape(&[a.rows(), end], a.shape()));
    }
    let mut data = Vec::with_capacity(a.rows() * (end - start));
    for row in a.row_iter() {
        data.extend_from_slice(&row[start..end]);
    }
    Tensor::new(&[a.rows(), end - start], data)
}
