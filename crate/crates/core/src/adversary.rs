//! L∞ projected gradient descent.
//!
//! The attack ascends the summed soft-target cross-entropy with signed
//! gradient steps, projecting after every step into the ε-ball around the
//! clean input intersected with the data box.

use serde::{Deserialize, Serialize};

use crate::nets::Model;
use crate::tensor::{grad, sign, Rng, Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub random_init: bool,
    pub data_bounds: (f64, f64),
}

impl Default for AttackConfig {
    /// ε = 8/255 with seven steps of 2/255, random start, data in `[0, 1]`.
    fn default() -> Self {
        Self {
            epsilon: 8.0 / 255.0,
            step_size: 2.0 / 255.0,
            steps: 7,
            random_init: true,
            data_bounds: (0.0, 1.0),
        }
    }
}

impl AttackConfig {
    /// Same schedule shape as the default (steps of ε/4) at a different
    /// budget.
    pub fn scaled(epsilon: f64, random_init: bool) -> Self {
        Self {
            epsilon,
            step_size: epsilon / 4.0,
            random_init,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config("epsilon must be finite and non-negative"));
        }
        if self.steps > 0 && !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("step_size must be positive when steps > 0"));
        }
        let (low, high) = self.data_bounds;
        if !(low < high) {
            return Err(Error::config("data_bounds must satisfy low < high"));
        }
        Ok(())
    }
}

/// Clamps `x_adv` into `[x - ε, x + ε] ∩ [low, high]`, componentwise.
pub fn linf_project(x_adv: &Tensor, x: &Tensor, config: &AttackConfig) -> Result<Tensor> {
    x_adv.same_shape(x)?;
    let eps = config.epsilon;
    let (low, high) = config.data_bounds;
    let data = x_adv
        .data()
        .iter()
        .zip(x.data())
        .map(|(&a, &c)| a.clamp(c - eps, c + eps).clamp(low, high))
        .collect();
    Tensor::new(x.shape(), data)
}

/// Gradient of the summed soft cross-entropy with respect to the input.
fn input_gradient(model: &Model, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let tape = Tape::new();
    let bound = model.bind(&tape);
    let input = tape.leaf(x.clone());
    let logp = bound.logits(input)?.softmax()?.ln_clamped()?;
    let loss = logp.mul(tape.leaf(y.clone()))?.sum()?.scale(-1.0)?;
    Ok(grad(loss, &[input])?.remove(0))
}

/// Untargeted L∞ PGD against `model` for inputs `x: [n, d]` and soft targets
/// `y: [n, C]`. The model is only read.
pub fn pgd_attack(
    model: &Model,
    x: &Tensor,
    y: &Tensor,
    config: &AttackConfig,
    rng: &mut Rng,
) -> Result<Tensor> {
    config.validate()?;
    if x.rank() != 2 || x.cols() != model.input_dim() {
        return Err(Error::shape(&[x.rows(), model.input_dim()], x.shape()));
    }
    if y.shape() != [x.rows(), model.num_classes()] {
        return Err(Error::shape(&[x.rows(), model.num_classes()], y.shape()));
    }
    let eps = config.epsilon;
    let mut x_adv = if config.random_init {
        let noisy = x.data().iter().map(|&v| v + rng.uniform_in(-eps, eps)).collect();
        let start = Tensor::new(x.shape(), noisy)?;
        linf_project(&start, x, config)?
    } else {
        linf_project(x, x, config)?
    };
    if eps == 0.0 {
        return Ok(x_adv);
    }
    for _ in 0..config.steps {
        let g = input_gradient(model, &x_adv, y)?;
        let stepped = Tensor::new(
            x.shape(),
            x_adv
                .data()
                .iter()
                .zip(g.data())
                .map(|(&a, &gi)| a + config.step_size * sign(gi))
                .collect(),
        )?;
        x_adv = linf_project(&stepped, x, config)?;
    }
    Ok(x_adv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{one_hot_rows, rcl_loss, DistillConfig};
    use crate::nets::Layer;
    use alloc::vec;
    use alloc::vec::Vec;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    fn cfg(eps: f64) -> AttackConfig {
        AttackConfig {
            epsilon: eps,
            step_size: eps.max(1e-3),
            steps: 1,
            random_init: false,
            data_bounds: (0.0, 1.0),
        }
    }

    #[test]
    fn default_budget() {
        let c = AttackConfig::default();
        assert_eq!(c.epsilon, 8.0 / 255.0);
        assert_eq!(c.step_size, 2.0 / 255.0);
        assert_eq!(c.steps, 7);
    }

    #[test]
    fn projection_examples() {
        let c = cfg(0.1);
        let p = linf_project(&t(&[1], &[0.2]), &t(&[1], &[0.0]), &c).unwrap();
        assert_eq!(p.data(), &[0.1]);
        let p = linf_project(&t(&[1], &[0.32]), &t(&[1], &[0.3]), &c).unwrap();
        assert_eq!(p.data(), &[0.32]);
        let p = linf_project(&t(&[1], &[-0.2]), &t(&[1], &[0.05]), &c).unwrap();
        assert_eq!(p.data(), &[0.0]);
        assert!(linf_project(&t(&[2], &[0.0, 0.0]), &t(&[1], &[0.0]), &c).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::default().validate().is_ok());
        let mut c = AttackConfig::default();
        c.epsilon = -0.1;
        assert!(c.validate().is_err());
        let mut c = AttackConfig::default();
        c.step_size = 0.0;
        assert!(c.validate().is_err());
        c.steps = 0;
        assert!(c.validate().is_ok());
        let mut c = AttackConfig::default();
        c.data_bounds = (1.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_budget_returns_input() {
        let m = Model::init(&[3, 5, 2], &mut Rng::new(1)).unwrap();
        let x = t(&[2, 3], &[0.1, 0.5, 0.9, 0.3, 0.3, 0.3]);
        let y = one_hot_rows(&[0, 1], 2).unwrap();
        let mut c = AttackConfig::scaled(0.0, true);
        c.step_size = 0.1;
        assert_eq!(pgd_attack(&m, &x, &y, &c, &mut Rng::new(2)).unwrap(), x);
    }

    #[test]
    fn single_step_on_linear_model_matches_analytic_sign() {
        // logits = x W + b with W = [[2, -1], [-3, 0.5]]; label 0.
        // dCE/dx = W (p - y); p - y = [p0 - 1, p1] = [-p1, p1]
        // so dCE/dx_i = p1 (W_i1 - W_i0): x0 -> sign(-3) < 0, x1 -> sign(3.5) > 0
        let m = Model::from_layers(vec![Layer {
            weight: t(&[2, 2], &[2.0, -1.0, -3.0, 0.5]),
            bias: t(&[2], &[0.1, -0.2]),
        }])
        .unwrap();
        let x = t(&[1, 2], &[0.5, 0.5]);
        let y = one_hot_rows(&[0], 2).unwrap();
        let c = AttackConfig {
            epsilon: 0.1,
            step_size: 0.25,
            steps: 1,
            random_init: false,
            data_bounds: (0.0, 1.0),
        };
        let adv = pgd_attack(&m, &x, &y, &c, &mut Rng::new(0)).unwrap();
        assert_eq!(adv.data(), &[0.4, 0.6]);
    }

    #[test]
    fn deterministic_without_random_start() {
        let m = Model::init(&[2, 6, 3], &mut Rng::new(7)).unwrap();
        let x = t(&[2, 2], &[0.2, 0.8, 0.6, 0.1]);
        let y = one_hot_rows(&[2, 0], 3).unwrap();
        let c = AttackConfig::scaled(0.05, false);
        let a = pgd_attack(&m, &x, &y, &c, &mut Rng::new(1)).unwrap();
        let b = pgd_attack(&m, &x, &y, &c, &mut Rng::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attack_does_not_touch_model() {
        let m = Model::init(&[2, 6, 3], &mut Rng::new(7)).unwrap();
        let fp = m.fingerprint();
        let x = t(&[1, 2], &[0.2, 0.8]);
        let y = one_hot_rows(&[1], 3).unwrap();
        pgd_attack(&m, &x, &y, &AttackConfig::default(), &mut Rng::new(1)).unwrap();
        assert_eq!(m.fingerprint(), fp);
    }

    #[test]
    fn linear_model_loss_never_drops() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let m = Model::init(&[3, 4], &mut rng).unwrap();
            let x = Tensor::new(&[5, 3], (0..15).map(|_| rng.uniform()).collect()).unwrap();
            let labels: Vec<usize> = (0..5).map(|_| rng.below(4)).collect();
            let y = one_hot_rows(&labels, 4).unwrap();
            let d = DistillConfig::default();
            let base = rcl_loss(&m, None, &x, &y, &d).unwrap();
            let mut prev = base;
            for steps in 1..6 {
                let mut c = AttackConfig::scaled(0.08, false);
                c.steps = steps;
                let adv = pgd_attack(&m, &x, &y, &c, &mut rng).unwrap();
                let l = rcl_loss(&m, None, &adv, &y, &d).unwrap();
                assert!(l >= prev - 1e-12, "{l} < {prev}");
                prev = l;
            }
        }
    }

    #[test]
    fn shape_errors() {
        let m = Model::init(&[2, 3], &mut Rng::new(0)).unwrap();
        let x = t(&[1, 3], &[0.0; 3]);
        let y = one_hot_rows(&[0], 3).unwrap();
        assert!(pgd_attack(&m, &x, &y, &AttackConfig::default(), &mut Rng::new(0)).is_err());
    }
}
