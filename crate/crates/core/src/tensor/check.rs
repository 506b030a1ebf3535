use super::{kernels, Tensor};
use crate::{Error, Result};

/// Probabilities of a 1-D logit vector, computed with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.is_empty() {
        return Err(Error::EmptyLogits);
    }
    if logits.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let mut out = logits.clone();
    kernels::softmax_in_place(out.data_mut());
    Ok(out)
}

/// Central-difference gradient of `f` at `x` with step `h`, one coordinate at
/// a time: `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff<F>(mut f: F, x: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::NonPositiveStep);
    }
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}
