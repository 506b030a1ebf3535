use alloc::vec::Vec;

use crate::adversary::pgd_attack;
use crate::augment::{build_pool, AugmentStats, AugmentedSample, PoolSources};
use crate::losses::{one_hot_rows, taba_objective};
use crate::memory::{BoundarySet, Sample, StageClasses};
use crate::nets::{sgd_step, Model, ModelSnapshot, OptimizerState};
use crate::taskstream::LabeledDataset;
use crate::tensor::{grad, Rng, Tape, Tensor};
use crate::{Error, Result};

use super::TrainConfig;

/// Counters of which components a run exercised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Instrumentation {
    /// PGD calls made while training (originals and augmented batches).
    pub train_attacks: usize,
    /// Augmentation pools requested.
    pub augment_calls: usize,
    pub augment: AugmentStats,
    pub optimizer_steps: usize,
    /// Boundary-set size at the end of every epoch, in order.
    pub boundary_sizes: Vec<usize>,
}

impl Instrumentation {
    pub fn merge(&mut self, other: &Instrumentation) {
        self.train_attacks += other.train_attacks;
        self.augment_calls += other.augment_calls;
        self.augment.merge(&other.augment);
        self.optimizer_steps += other.optimizer_steps;
        self.boundary_sizes.extend_from_slice(&other.boundary_sizes);
    }
}

/// The last optimisation step of a stage, kept so the recorded objective can
/// be recomputed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// Parameters the loss was evaluated at (before the update).
    pub model: Model,
    pub teacher: Option<ModelSnapshot>,
    pub x_adv: Tensor,
    pub y: Tensor,
    pub aug_x_adv: Tensor,
    pub aug_y: Tensor,
    pub total: f64,
    pub rcl: f64,
    pub taba: f64,
}

/// Everything one stage trains on.
#[derive(Debug, Clone, Copy)]
pub struct StageInput<'a> {
    /// New-class data together with the replayed exemplars.
    pub data: &'a LabeledDataset,
    pub classes: StageClasses,
    /// Previous-stage model; `None` exactly at the first stage.
    pub teacher: Option<&'a ModelSnapshot>,
    /// Stored exemplars, the fallback old-class source for augmentation.
    pub memory: &'a [Sample],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    /// Boundary set of the final epoch (empty when no epoch ran).
    pub boundary: BoundarySet,
    pub last_batch: Option<BatchRecord>,
    /// Mean recorded objective per epoch.
    pub epoch_losses: Vec<f64>,
}

fn batch_tensor(rows: &[&[f64]], dim: usize) -> Result<Tensor> {
    Tensor::from_rows(rows, dim)
}

fn augmented_batch(samples: &[AugmentedSample], dim: usize, classes: usize) -> Result<(Tensor, Tensor)> {
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let ys: Vec<&[f64]> = samples.iter().map(|s| s.y.as_slice()).collect();
    Ok((batch_tensor(&xs, dim)?, batch_tensor(&ys, classes)?))
}

/// One stage of robust continual training.
///
/// Per epoch `e`: an augmentation pool of `M·m'` samples is built from the
/// previous epoch's boundary set (the whole stage data before the first
/// epoch); the data is shuffled into `M = ceil(n / m)` mini-batches; each
/// batch is attacked, its clean samples misclassified under attack join
/// this epoch's boundary set, the next `m'` pool samples are attacked too,
/// and one momentum-SGD step is taken on `L_RCL(original) + L_RCL(augmented)`.
///
/// Clean-only methods skip the attack (the boundary set then records clean
/// mistakes) and non-augmenting methods skip the pool.
pub fn train_stage(
    model: &mut Model,
    input: StageInput<'_>,
    config: &TrainConfig,
    rng: &mut Rng,
    instr: &mut Instrumentation,
) -> Result<StageOutcome> {
    let data = input.data;
    if data.is_empty() {
        return Err(Error::Empty("stage data"));
    }
    if model.num_classes() != input.classes.seen {
        return Err(Error::model("head size differs from the seen-class count"));
    }
    if input.teacher.is_some() != (input.classes.old > 0) {
        return Err(Error::config("a teacher is required exactly when old classes exist"));
    }
    let seen = input.classes.seen;
    let dim = data.dim();
    let n = data.len();
    let m = config.batch_size;
    let batches = n.div_ceil(m);
    let m_prime = config.augment.m_prime;
    let method = config.method;

    let mut state = OptimizerState::new(model, config.learning_rate, config.momentum)?;
    let stage_pool = BoundarySet::from_dataset(data, input.classes)?;
    let mut previous = stage_pool.clone();
    let mut last_batch = None;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        let pool = if method.augments() {
            instr.augment_calls += 1;
            let sources = PoolSources {
                boundary: &previous,
                stage: &stage_pool,
                memory: input.memory,
            };
            build_pool(&config.augment, sources, input.classes, batches * m_prime, rng, &mut instr.augment)?
        } else {
            Vec::new()
        };

        let mut boundary = BoundarySet::empty(epoch);
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(m).enumerate() {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| data.samples().row(i)).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let x = batch_tensor(&rows, dim)?;
            let y = one_hot_rows(&labels, seen)?;
            let x_adv = if method.adversarial() {
                instr.train_attacks += 1;
                pgd_attack(model, &x, &y, &config.train_attack, rng)?
            } else {
                x.clone()
            };
            for ((row, &label), predicted) in rows.iter().zip(&labels).zip(model.predict(&x_adv)?) {
                boundary.update(row, label, predicted, input.classes)?;
            }

            let slice = pool.get(b * m_prime..((b + 1) * m_prime).min(pool.len())).unwrap_or(&[]);
            let (aug_x_adv, aug_y) = if slice.is_empty() {
                (Tensor::zeros(&[0, dim]), Tensor::zeros(&[0, seen]))
            } else {
                let (ax, ay) = augmented_batch(slice, dim, seen)?;
                instr.train_attacks += 1;
                (pgd_attack(model, &ax, &ay, &config.train_attack, rng)?, ay)
            };

            let tape = Tape::new();
            let bound = model.bind(&tape);
            let objective = taba_objective(
                &tape,
                &bound,
                seen,
                input.teacher,
                (&x_adv, &y),
                (&aug_x_adv, &aug_y),
                &config.distill,
            )?;
            let total = objective.total.item()?;
            let grads = grad(objective.total, bound.params())?;
            drop(bound);
            if epoch == config.epochs && b + 1 == batches {
                last_batch = Some(BatchRecord {
                    model: model.clone(),
                    teacher: input.teacher.cloned(),
                    x_adv,
                    y,
                    aug_x_adv,
                    aug_y,
                    total,
                    rcl: objective.rcl,
                    taba: objective.taba,
                });
            }
            sgd_step(model, &grads, &mut state)?;
            instr.optimizer_steps += 1;
            loss_sum += total;
        }
        epoch_losses.push(loss_sum / batches as f64);
        instr.boundary_sizes.push(boundary.len());
        previous = boundary;
    }

    let boundary = if config.epochs == 0 {
        BoundarySet::empty(0)
    } else {
        previous
    };
    Ok(StageOutcome {
        boundary,
        last_batch,
        epoch_losses,
    })
}
