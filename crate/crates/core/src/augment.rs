//! Interpolation-based augmentation: task-aware boundary augmentation and the
//! Mixup baseline, with the three switches that separate them.
//!
//! | `use_boundary` | `task_aware` | `restrict_lambda` | behaviour |
//! |---|---|---|---|
//! | off | off | off | Mixup over the whole stage data, λ ~ U[0, 1] |
//! | on  | off | off | Mixup over the boundary set |
//! | on  | on  | off | old × new boundary pairs, λ ~ U[0, 1] |
//! | on  | on  | on  | old × new boundary pairs, λ ~ U[0.45, 0.55] |

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::memory::{BoundarySet, Sample, StageClasses};
use crate::tensor::Rng;
use crate::{Error, Result};

pub const RESTRICTED_LAMBDA: (f64, f64) = (0.45, 0.55);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub use_boundary: bool,
    pub task_aware: bool,
    pub restrict_lambda: bool,
    /// Augmented samples per mini-batch.
    pub m_prime: usize,
}

impl AugmentConfig {
    pub fn new(use_boundary: bool, task_aware: bool, restrict_lambda: bool, m_prime: usize) -> Self {
        let (lambda_low, lambda_high) = if restrict_lambda {
            RESTRICTED_LAMBDA
        } else {
            (0.0, 1.0)
        };
        Self {
            lambda_low,
            lambda_high,
            use_boundary,
            task_aware,
            restrict_lambda,
            m_prime,
        }
    }

    pub fn taba(m_prime: usize) -> Self {
        Self::new(true, true, true, m_prime)
    }

    pub fn mixup(m_prime: usize) -> Self {
        Self::new(false, false, false, m_prime)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lambda_low && self.lambda_low <= self.lambda_high && self.lambda_high <= 1.0) {
            return Err(Error::config("need 0 <= lambda_low <= lambda_high <= 1"));
        }
        let expected = if self.restrict_lambda {
            RESTRICTED_LAMBDA
        } else {
            (0.0, 1.0)
        };
        if (self.lambda_low, self.lambda_high) != expected {
            return Err(Error::config(
                "lambda bounds must be (0.45, 0.55) when restricted and (0, 1) otherwise",
            ));
        }
        Ok(())
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::taba(16)
    }
}

/// An interpolated input with its soft label.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Uniform draw in `[lambda_low, lambda_high]`.
pub fn sample_lambda(config: &AugmentConfig, rng: &mut Rng) -> f64 {
    rng.uniform_in(config.lambda_low, config.lambda_high)
}

/// `x̄ = λ x_a + (1 - λ) x_b`, `ȳ = λ onehot(a) + (1 - λ) onehot(b)`.
pub fn interpolate(a: &Sample, b: &Sample, lambda: f64, num_classes: usize) -> Result<AugmentedSample> {
    if a.x.len() != b.x.len() {
        return Err(Error::LengthMismatch(a.x.len(), b.x.len()));
    }
    for s in [a, b] {
        if s.label >= num_classes {
            return Err(Error::UnknownClass(s.label));
        }
    }
    let x = a
        .x
        .iter()
        .zip(&b.x)
        .map(|(&u, &v)| lambda * u + (1.0 - lambda) * v)
        .collect();
    let mut y = alloc::vec![0.0; num_classes];
    y[a.label] += lambda;
    y[b.label] += 1.0 - lambda;
    Ok(AugmentedSample { x, y })
}

/// `count` samples, each pairing a uniform draw from `b_old` with a uniform
/// draw from `b_new` under a fresh λ. Empty when either side is empty.
pub fn taba_augment(
    b_old: &[Sample],
    b_new: &[Sample],
    config: &AugmentConfig,
    num_classes: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<AugmentedSample>> {
    Ok(cross_pairs(b_old, b_new, config, num_classes, count, rng)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

fn cross_pairs(
    b_old: &[Sample],
    b_new: &[Sample],
    config: &AugmentConfig,
    num_classes: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<(AugmentedSample, f64)>> {
    if b_old.is_empty() || b_new.is_empty() {
        return Ok(Vec::new());
    }
    (0..count)
        .map(|_| {
            let o = &b_old[rng.below(b_old.len())];
            let n = &b_new[rng.below(b_new.len())];
            let lambda = sample_lambda(config, rng);
            Ok((interpolate(o, n, lambda, num_classes)?, lambda))
        })
        .collect()
}

fn random_pairs(
    pool: &[Sample],
    lambda_range: (f64, f64),
    num_classes: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<(AugmentedSample, f64)>> {
    if pool.is_empty() {
        return Err(Error::Empty("augmentation pool"));
    }
    (0..count)
        .map(|_| {
            let a = &pool[rng.below(pool.len())];
            let b = &pool[rng.below(pool.len())];
            let lambda = rng.uniform_in(lambda_range.0, lambda_range.1);
            Ok((interpolate(a, b, lambda, num_classes)?, lambda))
        })
        .collect()
}

/// Mixup: both parents drawn uniformly from the whole pool, λ ~ U[0, 1].
pub fn mixup_augment(
    pool: &[Sample],
    num_classes: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<AugmentedSample>> {
    Ok(random_pairs(pool, (0.0, 1.0), num_classes, count, rng)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Counters describing which augmentation paths were taken.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentStats {
    pub pools_built: usize,
    pub empty_pools: usize,
    pub samples: usize,
    pub boundary_source: usize,
    pub whole_source: usize,
    pub task_aware_pools: usize,
    pub random_pair_pools: usize,
    pub memory_fallbacks: usize,
    /// Samples whose parents came from different sides of the old/new split.
    pub cross_partition: usize,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
}

impl AugmentStats {
    fn observe(&mut self, samples: &[AugmentedSample], classes: StageClasses) {
        self.samples += samples.len();
        for s in samples {
            let old_mass: f64 = s.y[..classes.old].iter().sum();
            let new_mass: f64 = s.y[classes.old..].iter().sum();
            if old_mass > 0.0 && new_mass > 0.0 {
                self.cross_partition += 1;
            }
        }
    }

    fn observe_lambda(&mut self, lambda: f64) {
        self.lambda_min = Some(self.lambda_min.map_or(lambda, |m| m.min(lambda)));
        self.lambda_max = Some(self.lambda_max.map_or(lambda, |m| m.max(lambda)));
    }

    pub fn merge(&mut self, other: &AugmentStats) {
        self.pools_built += other.pools_built;
        self.empty_pools += other.empty_pools;
        self.samples += other.samples;
        self.boundary_source += other.boundary_source;
        self.whole_source += other.whole_source;
        self.task_aware_pools += other.task_aware_pools;
        self.random_pair_pools += other.random_pair_pools;
        self.memory_fallbacks += other.memory_fallbacks;
        self.cross_partition += other.cross_partition;
        if let Some(v) = other.lambda_min {
            self.observe_lambda(v);
        }
        if let Some(v) = other.lambda_max {
            self.observe_lambda(v);
        }
    }
}

/// Where augmentation parents may come from at one epoch.
#[derive(Debug, Clone, Copy)]
pub struct PoolSources<'a> {
    /// Boundary set of the previous epoch.
    pub boundary: &'a BoundarySet,
    /// The whole stage training data, split old/new.
    pub stage: &'a BoundarySet,
    /// Exemplar memory, used when the old boundary part is empty.
    pub memory: &'a [Sample],
}

/// Builds one epoch's augmentation pool of `count` samples according to the
/// switches in `config`. An empty result means the augmentation term is
/// skipped for the epoch.
pub fn build_pool(
    config: &AugmentConfig,
    sources: PoolSources<'_>,
    classes: StageClasses,
    count: usize,
    rng: &mut Rng,
    stats: &mut AugmentStats,
) -> Result<Vec<AugmentedSample>> {
    config.validate()?;
    stats.pools_built += 1;
    let source = if config.use_boundary {
        stats.boundary_source += 1;
        sources.boundary
    } else {
        stats.whole_source += 1;
        sources.stage
    };

    let pool = if config.task_aware {
        stats.task_aware_pools += 1;
        let mut old: &[Sample] = &source.old;
        if old.is_empty() && classes.old > 0 && !sources.memory.is_empty() {
            stats.memory_fallbacks += 1;
            old = sources.memory;
        }
        cross_pairs(old, &source.new, config, classes.seen, count, rng)?
    } else {
        stats.random_pair_pools += 1;
        let all: Vec<Sample> = source.old.iter().chain(&source.new).cloned().collect();
        if all.is_empty() {
            Vec::new()
        } else {
            random_pairs(&all, (config.lambda_low, config.lambda_high), classes.seen, count, rng)?
        }
    };

    if pool.is_empty() {
        stats.empty_pools += 1;
    }
    let mut out = Vec::with_capacity(pool.len());
    for (sample, lambda) in pool {
        stats.observe_lambda(lambda);
        out.push(sample);
    }
    stats.observe(&out, classes);
    Ok(out)
}
