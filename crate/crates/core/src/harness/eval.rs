use alloc::boxed::Box;
use alloc::vec::Vec;
use core::ops::Range;

use crate::adversary::{pgd_attack, AttackConfig};
use crate::losses::one_hot_rows;
use crate::nets::Model;
use crate::taskstream::LabeledDataset;
use crate::tensor::Rng;
use crate::{Error, Result};

/// Test points per evaluation chunk. Chunking is fixed, so any evaluator that
/// processes the same chunks produces the same flags.
pub const EVAL_CHUNK: usize = 64;

/// Runs a per-chunk job over `0..chunks` and returns the results in chunk
/// order.
pub trait Evaluator {
    fn map_chunks(
        &self,
        chunks: usize,
        job: &(dyn Fn(usize) -> Result<Vec<bool>> + Sync),
    ) -> Result<Vec<Vec<bool>>>;
}

/// Chunks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialEvaluator;

impl Evaluator for SerialEvaluator {
    fn map_chunks(
        &self,
        chunks: usize,
        job: &(dyn Fn(usize) -> Result<Vec<bool>> + Sync),
    ) -> Result<Vec<Vec<bool>>> {
        (0..chunks).map(job).collect()
    }
}

fn chunk_range(n: usize, i: usize) -> Range<usize> {
    i * EVAL_CHUNK..((i + 1) * EVAL_CHUNK).min(n)
}

/// Per-point correctness on clean and attacked inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub labels: Vec<usize>,
    pub clean: Vec<bool>,
    pub robust: Vec<bool>,
}

fn fraction(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in flags {
        hit += f as usize;
        total += 1;
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

impl Evaluation {
    pub fn sa(&self) -> f64 {
        fraction(self.clean.iter().copied()).unwrap_or(0.0)
    }

    pub fn ra(&self) -> f64 {
        fraction(self.robust.iter().copied()).unwrap_or(0.0)
    }

    /// Clean accuracy over points whose label satisfies `keep`.
    pub fn sa_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        fraction(self.labels.iter().zip(&self.clean).filter(|(l, _)| keep(**l)).map(|(_, &c)| c))
    }

    /// Robust accuracy over points whose label satisfies `keep`.
    pub fn ra_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        fraction(self.labels.iter().zip(&self.robust).filter(|(l, _)| keep(**l)).map(|(_, &c)| c))
    }
}

fn check_test(model: &Model, test: &LabeledDataset) -> Result<()> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if let Some(&c) = test.class_set().iter().find(|&&c| c >= model.num_classes()) {
        return Err(Error::UnknownClass(c));
    }
    Ok(())
}

fn correct_flags(model: &Model, test: &LabeledDataset, range: Range<usize>, attack: Option<(&AttackConfig, u64)>, chunk: usize) -> Result<Vec<bool>> {
    let idx: Vec<usize> = range.collect();
    let part = test.subset(&idx);
    let x = match attack {
        None => part.samples().clone(),
        Some((cfg, seed)) => {
            let y = one_hot_rows(part.labels(), model.num_classes())?;
            let mut rng = Rng::derive(seed, chunk as u64);
            pgd_attack(model, part.samples(), &y, cfg, &mut rng)?
        }
    };
    Ok(model
        .predict(&x)?
        .into_iter()
        .zip(part.labels())
        .map(|(p, &l)| p == l)
        .collect())
}

fn flags(
    model: &Model,
    test: &LabeledDataset,
    attack: Option<(&AttackConfig, u64)>,
    evaluator: &dyn Evaluator,
) -> Result<Vec<bool>> {
    let n = test.len();
    let job = move |i: usize| correct_flags(model, test, chunk_range(n, i), attack, i);
    let job: Box<dyn Fn(usize) -> Result<Vec<bool>> + Sync + '_> = Box::new(job);
    Ok(evaluator.map_chunks(n.div_ceil(EVAL_CHUNK), &*job)?.concat())
}

/// Clean and PGD correctness of every test point. Each chunk's attack draws
/// from its own stream derived from `seed`.
pub fn evaluate(
    model: &Model,
    test: &LabeledDataset,
    attack: &AttackConfig,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<Evaluation> {
    check_test(model, test)?;
    attack.validate()?;
    Ok(Evaluation {
        labels: test.labels().to_vec(),
        clean: flags(model, test, None, evaluator)?,
        robust: flags(model, test, Some((attack, seed)), evaluator)?,
    })
}

/// Fraction of test points whose argmax prediction (lowest index on ties)
/// equals the label.
pub fn evaluate_sa(model: &Model, test: &LabeledDataset) -> Result<f64> {
    check_test(model, test)?;
    let f = flags(model, test, None, &SerialEvaluator)?;
    Ok(fraction(f.into_iter()).unwrap_or(0.0))
}

/// Fraction of test points still classified correctly after an untargeted
/// PGD attack against their true label.
pub fn evaluate_ra_pgd(
    model: &Model,
    test: &LabeledDataset,
    attack: &AttackConfig,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Result<f64> {
    check_test(model, test)?;
    attack.validate()?;
    let f = flags(model, test, Some((attack, seed)), evaluator)?;
    Ok(fraction(f.into_iter()).unwrap_or(0.0))
}
