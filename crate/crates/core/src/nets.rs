//! MLP classifiers with an expandable class head, frozen teacher snapshots
//! and SGD with momentum.

use alloc::format;
use alloc::vec::Vec;

use crate::tensor::{kernels, Rng, Tape, Tensor, Var};
use crate::{Error, Result};

/// One affine layer. `weight` is `[fan_in, fan_out]`, `bias` is `[fan_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Fully connected classifier: ReLU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
}

impl Model {
    /// He-uniform initialisation: every weight of a layer with fan-in `k` is
    /// drawn from `U(-sqrt(6/k), sqrt(6/k))`, row-major, layer by layer.
    /// Biases start at zero.
    pub fn init(layer_dims: &[usize], rng: &mut Rng) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let bound = libm::sqrt(6.0 / w[0] as f64);
                let data = (0..w[0] * w[1])
                    .map(|_| rng.uniform_in(-bound, bound))
                    .collect();
                Layer {
                    weight: Tensor::new(&[w[0], w[1]], data).expect("layer shape"),
                    bias: Tensor::zeros(&[w[1]]),
                }
            })
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::model("at least one layer is required"));
        }
        let mut dims = Vec::with_capacity(layers.len() + 1);
        dims.push(layers[0].weight.shape().first().copied().unwrap_or(0));
        for layer in &layers {
            let ws = layer.weight.shape();
            if ws.len() != 2 || ws[0] != *dims.last().unwrap() {
                return Err(Error::model(format!("weight shape {ws:?} does not chain")));
            }
            if layer.bias.shape() != [ws[1]] {
                return Err(Error::shape(&[ws[1]], layer.bias.shape()));
            }
            dims.push(ws[1]);
        }
        check_dims(&dims)?;
        Ok(Self {
            layer_dims: dims,
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters in canonical order: weight then bias, layer by layer.
    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// All parameters concatenated in canonical order.
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.parameters()
            .flat_map(|p| p.data().iter().copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::LengthMismatch(self.parameter_count(), flat.len()));
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.rank() != 2 || batch.cols() != self.input_dim() {
            return Err(Error::shape(&[batch.rows(), self.input_dim()], batch.shape()));
        }
        Ok(())
    }

    /// Raw logits `[n, num_classes]` for a batch `[n, input_dim]`.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut h = batch.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = kernels::add_bias(&kernels::matmul(&h, &layer.weight)?, &layer.bias)?;
            if i < last {
                h = kernels::relu(&h);
            }
        }
        Ok(h)
    }

    /// Row-wise softmax of the logits.
    pub fn probabilities(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(kernels::softmax_rows(&self.logits(batch)?))
    }

    /// Predicted class per row (lowest index on ties).
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        Ok(self.logits(batch)?.argmax_rows())
    }

    /// Post-ReLU activations of the last hidden layer, each row scaled to
    /// unit L2 norm (all-zero rows stay zero).
    pub fn extract_features(&self, batch: &Tensor) -> Result<Tensor> {
        if self.layers.len() < 2 {
            return Err(Error::model("feature extraction needs a hidden layer"));
        }
        self.check_batch(batch)?;
        let mut h = batch.clone();
        for layer in &self.layers[..self.layers.len() - 1] {
            h = kernels::relu(&kernels::add_bias(
                &kernels::matmul(&h, &layer.weight)?,
                &layer.bias,
            )?);
        }
        for r in 0..h.rows() {
            let row = h.row_mut(r);
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Ok(h)
    }

    /// Copy with `new_num_classes` outputs. Added head columns and biases are
    /// zero, so existing logits are reproduced bit-for-bit.
    pub fn expand_head(&self, new_num_classes: usize) -> Result<Model> {
        let old = self.num_classes();
        if new_num_classes <= old {
            return Err(Error::model(format!(
                "head can only grow: {old} -> {new_num_classes}"
            )));
        }
        let mut out = self.clone();
        let head = out.layers.last_mut().unwrap();
        let fan_in = head.weight.shape()[0];
        let mut weight = Tensor::zeros(&[fan_in, new_num_classes]);
        for r in 0..fan_in {
            weight.row_mut(r)[..old].copy_from_slice(head.weight.row(r));
        }
        let mut bias = Tensor::zeros(&[new_num_classes]);
        bias.data_mut()[..old].copy_from_slice(head.bias.data());
        head.weight = weight;
        head.bias = bias;
        *out.layer_dims.last_mut().unwrap() = new_num_classes;
        Ok(out)
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundModel<'t> {
        let params = self.parameters().map(|p| tape.leaf(p.clone())).collect();
        BoundModel { params }
    }

    /// 64-bit FNV-1a digest of the parameter bits and layer dims.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |word: u64| {
            for b in word.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for &d in &self.layer_dims {
            eat(d as u64);
        }
        for p in self.parameters() {
            for v in p.data() {
                eat(v.to_bits());
            }
        }
        h
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::model("layer_dims needs at least input and output"));
    }
    if dims.contains(&0) {
        return Err(Error::model("layer dims must be positive"));
    }
    Ok(())
}

/// A model's parameters recorded on a tape.
#[derive(Debug, Clone)]
pub struct BoundModel<'t> {
    params: Vec<Var<'t>>,
}

impl<'t> BoundModel<'t> {
    pub fn params(&self) -> &[Var<'t>] {
        &self.params
    }

    pub fn logits(&self, batch: Var<'t>) -> Result<Var<'t>> {
        let mut h = batch;
        let layers = self.params.len() / 2;
        for (i, pair) in self.params.chunks(2).enumerate() {
            h = h.matmul(pair[0])?.add_bias(pair[1])?;
            if i + 1 < layers {
                h = h.relu()?;
            }
        }
        Ok(h)
    }
}

/// Frozen copy of a model, used as the distillation teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    model: Model,
}

impl ModelSnapshot {
    pub fn of(model: &Model) -> Self {
        Self {
            model: model.clone(),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.model.logits(batch)
    }

    pub fn fingerprint(&self) -> u64 {
        self.model.fingerprint()
    }
}

/// SGD with heavy-ball momentum: `v <- momentum * v + g; w <- w - lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    learning_rate: f64,
    momentum: f64,
    velocity: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(model: &Model, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        Ok(Self {
            learning_rate,
            momentum,
            velocity: model.parameters().map(|p| Tensor::zeros(p.shape())).collect(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }
}

/// Applies one momentum update to every parameter. Gradients must follow
/// [`Model::parameters`] order.
pub fn sgd_step(model: &mut Model, grads: &[Tensor], state: &mut OptimizerState) -> Result<()> {
    if grads.len() != state.velocity.len() {
        return Err(Error::LengthMismatch(state.velocity.len(), grads.len()));
    }
    for ((p, g), v) in model.parameters().zip(grads).zip(&state.velocity) {
        p.same_shape(g)?;
        p.same_shape(v)?;
    }
    let (lr, mu) = (state.learning_rate, state.momentum);
    for ((p, g), v) in model
        .parameters_mut()
        .zip(grads)
        .zip(state.velocity.iter_mut())
    {
        for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = mu * *vi + gi;
            *w -= lr * *vi;
        }
    }
    Ok(())
}
