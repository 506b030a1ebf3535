//! Classification, distillation and the composite robust continual-learning
//! objectives.
//!
//! Per-sample losses are reduced over a batch with the arithmetic mean. The
//! combined objective with augmentation is the sum of two batch means: one
//! over the original adversarial batch and one over the augmented
//! adversarial batch.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nets::{BoundModel, Model, ModelSnapshot};
use crate::tensor::{grad, kernels, Tape, Tensor, Var, LOG_CLAMP};
use crate::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability vector over classes; one-hot labels are a special case.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(Self(probs))
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::UnknownClass(class));
        }
        let mut probs = alloc::vec![0.0; num_classes];
        probs[class] = 1.0;
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Teacher probabilities over the old classes only.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutput {
    probs_old: Vec<f64>,
}

impl TeacherOutput {
    pub fn new(probs_old: Vec<f64>) -> Result<Self> {
        check_simplex(&probs_old)?;
        Ok(Self { probs_old })
    }

    pub fn probs_old(&self) -> &[f64] {
        &self.probs_old
    }
}

pub(crate) fn check_simplex(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|&v| !(v >= 0.0)) || libm::fabs(total - 1.0) > SIMPLEX_TOL {
        return Err(Error::NotSimplex);
    }
    Ok(())
}

fn clamped_ln(v: f64) -> f64 {
    libm::log(v.max(LOG_CLAMP))
}

/// `-sum_i y_i ln p_i`, with `p` clamped below at `1e-12`.
pub fn soft_cross_entropy(p: &[f64], y: &SoftLabel) -> Result<f64> {
    if p.len() != y.0.len() {
        return Err(Error::LengthMismatch(y.0.len(), p.len()));
    }
    Ok(-p.iter().zip(&y.0).map(|(&pi, &yi)| yi * clamped_ln(pi)).sum::<f64>())
}

/// Shannon entropy in nats (the distillation minimum).
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * libm::log(v))
        .sum::<f64>()
}

/// `-sum_i p*_i ln p_i` over the old classes; zero without a teacher.
pub fn distillation_loss(p_old: &[f64], teacher: Option<&TeacherOutput>) -> Result<f64> {
    let Some(teacher) = teacher else {
        return Ok(0.0);
    };
    if p_old.len() != teacher.probs_old.len() {
        return Err(Error::LengthMismatch(teacher.probs_old.len(), p_old.len()));
    }
    Ok(-p_old
        .iter()
        .zip(&teacher.probs_old)
        .map(|(&p, &t)| t * clamped_ln(p))
        .sum::<f64>())
}

/// How the student's old-class distribution is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentOldProbs {
    /// Softmax over the old-class logits alone.
    #[default]
    Renormalized,
    /// Full softmax over all seen classes, restricted to old-class entries.
    FullSoftmaxSlice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub temperature: f64,
    pub student_old_probs: StudentOldProbs,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            student_old_probs: StudentOldProbs::Renormalized,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::config("distillation temperature must be positive"));
        }
        Ok(())
    }
}

/// Teacher soft labels `[n, |C_o|]` at the configured temperature.
pub fn teacher_targets(teacher: &ModelSnapshot, x: &Tensor, cfg: &DistillConfig) -> Result<Tensor> {
    let logits = teacher.logits(x)?;
    let t = cfg.temperature;
    Ok(kernels::softmax_rows(&logits.map(|v| v / t)))
}

/// Recorded loss terms for one batch.
#[derive(Debug, Clone, Copy)]
pub struct RclTerms<'t> {
    pub ce: Var<'t>,
    pub dis: Option<Var<'t>>,
    pub total: Var<'t>,
}

fn check_targets(y: &Tensor, rows: usize, classes: usize) -> Result<()> {
    if y.rank() != 2 || y.shape() != [rows, classes] {
        return Err(Error::shape(&[rows, classes], y.shape()));
    }
    for row in y.row_iter() {
        check_simplex(row)?;
    }
    Ok(())
}

/// Records `mean(CE) + mean(distillation)` of one batch on the tape.
/// Returns `None` for an empty batch.
pub fn rcl_terms<'t>(
    tape: &'t Tape,
    model: &BoundModel<'t>,
    num_classes: usize,
    teacher: Option<&ModelSnapshot>,
    x: &Tensor,
    y: &Tensor,
    cfg: &DistillConfig,
) -> Result<Option<RclTerms<'t>>> {
    let n = x.rows();
    if n == 0 || x.is_empty() {
        return Ok(None);
    }
    check_targets(y, n, num_classes)?;
    let logits = model.logits(tape.leaf(x.clone()))?;

    let log_p = logits.softmax()?.ln_clamped()?;
    let ce = log_p.mul(tape.leaf(y.clone()))?.sum()?.scale(-1.0 / n as f64)?;

    let dis = match teacher {
        None => None,
        Some(teacher) => {
            let old = teacher.num_classes();
            if old > num_classes {
                return Err(Error::model("teacher has more classes than the student"));
            }
            let targets = teacher_targets(teacher, x, cfg)?;
            let scaled = logits.scale(1.0 / cfg.temperature)?;
            let q = match cfg.student_old_probs {
                StudentOldProbs::Renormalized => scaled.select_cols(0, old)?.softmax()?,
                StudentOldProbs::FullSoftmaxSlice => scaled.softmax()?.select_cols(0, old)?,
            };
            let d = q
                .ln_clamped()?
                .mul(tape.leaf(targets))?
                .sum()?
                .scale(-1.0 / n as f64)?;
            Some(d)
        }
    };
    let total = match dis {
        Some(d) => ce.add(d)?,
        None => ce,
    };
    Ok(Some(RclTerms { ce, dis, total }))
}

/// The recorded combined objective plus its two parts' values.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'t> {
    pub total: Var<'t>,
    pub rcl: f64,
    pub taba: f64,
}

/// Records `L_RCL(original) + L_TABA(augmented)`. An empty augmented batch
/// contributes nothing.
#[allow(clippy::too_many_arguments)]
pub fn taba_objective<'t>(
    tape: &'t Tape,
    model: &BoundModel<'t>,
    num_classes: usize,
    teacher: Option<&ModelSnapshot>,
    original: (&Tensor, &Tensor),
    augmented: (&Tensor, &Tensor),
    cfg: &DistillConfig,
) -> Result<Objective<'t>> {
    let rcl = rcl_terms(tape, model, num_classes, teacher, original.0, original.1, cfg)?
        .ok_or(Error::Empty("original batch"))?;
    let aug = rcl_terms(tape, model, num_classes, teacher, augmented.0, augmented.1, cfg)?;
    let rcl_value = rcl.total.item()?;
    Ok(match aug {
        Some(a) => Objective {
            total: rcl.total.add(a.total)?,
            rcl: rcl_value,
            taba: a.total.item()?,
        },
        None => Objective {
            total: rcl.total,
            rcl: rcl_value,
            taba: 0.0,
        },
    })
}

/// Value of the robust continual-learning loss on an (already adversarial)
/// batch with soft targets `y: [n, C]`.
pub fn rcl_loss(
    model: &Model,
    teacher: Option<&ModelSnapshot>,
    x_adv: &Tensor,
    y: &Tensor,
    cfg: &DistillConfig,
) -> Result<f64> {
    let tape = Tape::new();
    let bound = model.bind(&tape);
    rcl_terms(&tape, &bound, model.num_classes(), teacher, x_adv, y, cfg)?
        .ok_or(Error::Empty("batch"))?
        .total
        .item()
}

/// Value of `L_RCL(original) + L_TABA(augmented)`.
pub fn taba_total_loss(
    model: &Model,
    teacher: Option<&ModelSnapshot>,
    original: (&Tensor, &Tensor),
    augmented: (&Tensor, &Tensor),
    cfg: &DistillConfig,
) -> Result<f64> {
    let tape = Tape::new();
    let bound = model.bind(&tape);
    taba_objective(&tape, &bound, model.num_classes(), teacher, original, augmented, cfg)?
        .total
        .item()
}

/// Value of [`taba_total_loss`] and its gradient for every parameter tensor,
/// in [`Model::parameters`] order.
pub fn taba_total_grad(
    model: &Model,
    teacher: Option<&ModelSnapshot>,
    original: (&Tensor, &Tensor),
    augmented: (&Tensor, &Tensor),
    cfg: &DistillConfig,
) -> Result<(f64, Vec<Tensor>)> {
    let tape = Tape::new();
    let bound = model.bind(&tape);
    let total = taba_objective(&tape, &bound, model.num_classes(), teacher, original, augmented, cfg)?.total;
    Ok((total.item()?, grad(total, bound.params())?))
}

/// One-hot target matrix `[labels.len(), num_classes]`.
pub fn one_hot_rows(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut y = Tensor::zeros(&[labels.len(), num_classes]);
    for (r, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::UnknownClass(c));
        }
        y.row_mut(r)[c] = 1.0;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Layer;
    use crate::tensor::{grad, softmax, Rng};
    use alloc::vec;
    use core::f64::consts::LN_2;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        let y = SoftLabel::one_hot(0, 2).unwrap();
        assert_eq!(soft_cross_entropy(&[1.0, 0.0], &y).unwrap(), 0.0);
        assert!((soft_cross_entropy(&[0.5, 0.5], &y).unwrap() - LN_2).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let y = SoftLabel::new(vec![0.45, 0.0, 0.55]).unwrap();
        let v = soft_cross_entropy(&[third, third, third], &y).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_errors() {
        let y = SoftLabel::one_hot(0, 2).unwrap();
        assert!(soft_cross_entropy(&[1.0], &y).is_err());
        assert_eq!(SoftLabel::new(vec![0.5, 0.6]), Err(Error::NotSimplex));
        assert_eq!(SoftLabel::new(vec![1.5, -0.5]), Err(Error::NotSimplex));
    }

    #[test]
    fn distillation_examples() {
        let t = TeacherOutput::new(vec![0.5, 0.5]).unwrap();
        assert!((distillation_loss(&[0.5, 0.5], Some(&t)).unwrap() - LN_2).abs() < 1e-12);

        let t = TeacherOutput::new(vec![0.9, 0.1]).unwrap();
        let d = distillation_loss(&[0.5, 0.5], Some(&t)).unwrap();
        assert!((d - LN_2).abs() < 1e-12);
        // H([0.9, 0.1]) evaluated directly
        assert!((entropy(t.probs_old()) - 0.325083).abs() < 1e-6);
        assert!(d > entropy(t.probs_old()));

        assert_eq!(distillation_loss(&[0.2, 0.8], None).unwrap(), 0.0);
        assert!(distillation_loss(&[1.0], Some(&t)).is_err());
    }

    fn linear(w: &[f64], b: &[f64], d: usize, c: usize) -> Model {
        Model::from_layers(vec![Layer {
            weight: t(&[d, c], w),
            bias: t(&[c], b),
        }])
        .unwrap()
    }

    #[test]
    fn rcl_without_teacher_is_cross_entropy() {
        let m = Model::init(&[3, 6, 3], &mut Rng::new(1)).unwrap();
        let x = t(&[2, 3], &[0.1, 0.2, 0.3, 0.9, 0.8, 0.7]);
        let y = one_hot_rows(&[0, 2], 3).unwrap();
        let cfg = DistillConfig::default();
        let got = rcl_loss(&m, None, &x, &y, &cfg).unwrap();
        let p = m.probabilities(&x).unwrap();
        let manual = (soft_cross_entropy(p.row(0), &SoftLabel::one_hot(0, 3).unwrap()).unwrap()
            + soft_cross_entropy(p.row(1), &SoftLabel::one_hot(2, 3).unwrap()).unwrap())
            / 2.0;
        assert!((got - manual).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_rcl_with_teacher() {
        // student: 1-D input, 3 classes, logits = x * [1, -1, 2]
        // teacher: 2 classes, logits = x * [2, 0]
        // x = 0.5: student logits [0.5, -0.5, 1.0], label class 2
        // teacher probs = softmax([1, 0]) = [e/(e+1), 1/(e+1)]
        // student old probs = softmax([0.5, -0.5]) = [e/(e+1), 1/(e+1)]
        // so distillation = H(teacher) and CE = -ln softmax(z)_2
        let student = linear(&[1.0, -1.0, 2.0], &[0.0, 0.0, 0.0], 1, 3);
        let teacher = ModelSnapshot::of(&linear(&[2.0, 0.0], &[0.0, 0.0], 1, 2));
        let x = t(&[1, 1], &[0.5]);
        let y = one_hot_rows(&[2], 3).unwrap();
        let e = core::f64::consts::E;
        let ce = -(1.0f64.exp() / (0.5f64.exp() + (-0.5f64).exp() + 1.0f64.exp())).ln();
        let pt = [e / (e + 1.0), 1.0 / (e + 1.0)];
        let dis = -(pt[0] * pt[0].ln() + pt[1] * pt[1].ln());
        let got = rcl_loss(&student, Some(&teacher), &x, &y, &DistillConfig::default()).unwrap();
        assert!((got - (ce + dis)).abs() < 1e-12);
    }

    #[test]
    fn terms_add_up() {
        let mut rng = Rng::new(5);
        let m = Model::init(&[2, 5, 4], &mut rng).unwrap();
        let teacher = ModelSnapshot::of(&Model::init(&[2, 5, 2], &mut rng).unwrap());
        let x = Tensor::new(&[3, 2], (0..6).map(|_| rng.uniform()).collect()).unwrap();
        let y = one_hot_rows(&[0, 3, 1], 4).unwrap();
        let cfg = DistillConfig::default();
        let tape = Tape::new();
        let bound = m.bind(&tape);
        let terms = rcl_terms(&tape, &bound, 4, Some(&teacher), &x, &y, &cfg)
            .unwrap()
            .unwrap();
        let a = terms.ce.item().unwrap();
        let b = terms.dis.unwrap().item().unwrap();
        assert!((terms.total.item().unwrap() - (a + b)).abs() < 1e-15);

        // distillation term matches the scalar definition row by row
        let targets = teacher_targets(&teacher, &x, &cfg).unwrap();
        let logits = m.logits(&x).unwrap();
        let mut manual = 0.0;
        for r in 0..3 {
            let q = softmax(&Tensor::vector(logits.row(r)[..2].to_vec())).unwrap();
            let to = TeacherOutput::new(targets.row(r).to_vec()).unwrap();
            manual += distillation_loss(q.data(), Some(&to)).unwrap();
        }
        assert!((b - manual / 3.0).abs() < 1e-12);
    }

    #[test]
    fn full_softmax_slice_mode() {
        let m = linear(&[1.0, -1.0, 2.0], &[0.0, 0.0, 0.0], 1, 3);
        let teacher = ModelSnapshot::of(&linear(&[2.0, 0.0], &[0.0, 0.0], 1, 2));
        let x = t(&[1, 1], &[0.5]);
        let y = one_hot_rows(&[0], 3).unwrap();
        let cfg = DistillConfig {
            temperature: 1.0,
            student_old_probs: StudentOldProbs::FullSoftmaxSlice,
        };
        let p = m.probabilities(&x).unwrap();
        let pt = teacher_targets(&teacher, &x, &DistillConfig::default()).unwrap();
        let dis = -(pt.data()[0] * p.data()[0].ln() + pt.data()[1] * p.data()[1].ln());
        let ce = -p.data()[0].ln();
        let got = rcl_loss(&m, Some(&teacher), &x, &y, &cfg).unwrap();
        assert!((got - (ce + dis)).abs() < 1e-12);
    }

    #[test]
    fn taba_total_with_empty_augmentation_is_rcl() {
        let mut rng = Rng::new(2);
        let m = Model::init(&[2, 4, 3], &mut rng).unwrap();
        let x = Tensor::new(&[2, 2], (0..4).map(|_| rng.uniform()).collect()).unwrap();
        let y = one_hot_rows(&[1, 2], 3).unwrap();
        let cfg = DistillConfig::default();
        let empty_x = Tensor::zeros(&[0, 2]);
        let empty_y = Tensor::zeros(&[0, 3]);
        let total = taba_total_loss(&m, None, (&x, &y), (&empty_x, &empty_y), &cfg).unwrap();
        assert_eq!(total, rcl_loss(&m, None, &x, &y, &cfg).unwrap());
    }

    #[test]
    fn hand_computed_taba_total() {
        // one original and one augmented sample on a 1-D, 2-class model
        // logits = x * [1, -1]
        let m = linear(&[1.0, -1.0], &[0.0, 0.0], 1, 2);
        let x = t(&[1, 1], &[1.0]);
        let y = t(&[1, 2], &[1.0, 0.0]);
        let xa = t(&[1, 1], &[0.0]);
        let ya = t(&[1, 2], &[0.45, 0.55]);
        // original: softmax([1,-1])_0 = 1/(1+e^-2); augmented: uniform -> ln 2
        let expected = (1.0 + (-2.0f64).exp()).ln() + LN_2;
        let got = taba_total_loss(&m, None, (&x, &y), (&xa, &ya), &DistillConfig::default()).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn batch_mean_is_order_invariant() {
        let mut rng = Rng::new(11);
        let m = Model::init(&[2, 5, 3], &mut rng).unwrap();
        let teacher = ModelSnapshot::of(&Model::init(&[2, 5, 2], &mut rng).unwrap());
        let x = Tensor::new(&[4, 2], (0..8).map(|_| rng.uniform()).collect()).unwrap();
        let labels = [0, 1, 2, 1];
        let y = one_hot_rows(&labels, 3).unwrap();
        let perm = [2, 0, 3, 1];
        let xp = x.gather_rows(&perm);
        let yp = y.gather_rows(&perm);
        let cfg = DistillConfig::default();
        let a = rcl_loss(&m, Some(&teacher), &x, &y, &cfg).unwrap();
        let b = rcl_loss(&m, Some(&teacher), &xp, &yp, &cfg).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_targets() {
        let m = Model::init(&[2, 3], &mut Rng::new(0)).unwrap();
        let x = t(&[1, 2], &[0.0, 0.0]);
        let cfg = DistillConfig::default();
        assert!(rcl_loss(&m, None, &x, &t(&[1, 3], &[0.5, 0.6, 0.0]), &cfg).is_err());
        assert!(rcl_loss(&m, None, &x, &t(&[1, 2], &[0.5, 0.5]), &cfg).is_err());
        assert!(one_hot_rows(&[3], 3).is_err());
    }

    #[test]
    fn objective_gradient_reaches_parameters() {
        let mut rng = Rng::new(4);
        let m = Model::init(&[2, 4, 2], &mut rng).unwrap();
        let x = Tensor::new(&[2, 2], (0..4).map(|_| rng.uniform()).collect()).unwrap();
        let y = one_hot_rows(&[0, 1], 2).unwrap();
        let tape = Tape::new();
        let bound = m.bind(&tape);
        let empty = (Tensor::zeros(&[0, 2]), Tensor::zeros(&[0, 2]));
        let obj = taba_objective(
            &tape,
            &bound,
            2,
            None,
            (&x, &y),
            (&empty.0, &empty.1),
            &DistillConfig::default(),
        )
        .unwrap();
        let g = grad(obj.total, bound.params()).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.iter().any(|t| t.data().iter().any(|&v| v != 0.0)));
    }
}
