//! Labeled datasets, synthetic Gaussian class mixtures and class-incremental
//! task streams.
//!
//! A [`TaskStream`] relabels classes by their position in the run's global
//! class order, so stage `t` always owns a contiguous block of class indices
//! and the classifier head can simply grow at the end.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::memory::Sample;
use crate::tensor::{Rng, Tensor};
use crate::{Error, Result};

/// Samples `[n, d]` in `[0, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Tensor,
    labels: Vec<usize>,
    class_set: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(samples: Tensor, labels: Vec<usize>) -> Result<Self> {
        if samples.rank() != 2 {
            return Err(Error::shape(&[labels.len(), samples.cols()], samples.shape()));
        }
        if samples.rows() != labels.len() {
            return Err(Error::LengthMismatch(samples.rows(), labels.len()));
        }
        if samples.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("samples must lie in [0, 1]"));
        }
        let class_set = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self {
            samples,
            labels,
            class_set,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            samples: Tensor::zeros(&[0, dim]),
            labels: Vec::new(),
            class_set: Vec::new(),
        }
    }

    pub fn from_samples(samples: &[Sample], dim: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
        let x = Tensor::from_rows(&rows, dim)?;
        Self::new(x, samples.iter().map(|s| s.label).collect())
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sorted distinct labels.
    pub fn class_set(&self) -> &[usize] {
        &self.class_set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            x: self.samples.row(i).to_vec(),
            label: self.labels[i],
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.samples.gather_rows(indices), labels).expect("subset of a valid dataset")
    }

    /// Rows whose label satisfies `keep`, in original order.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.subset(&idx)
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch(self.dim(), other.dim()));
        }
        let mut data = self.samples.data().to_vec();
        data.extend_from_slice(other.samples.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(Tensor::new(&[labels.len(), self.dim()], data)?, labels)
    }

    /// Applies `map` to every label.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Self {
        let labels = self.labels.iter().map(|&l| map(l)).collect();
        Self::new(self.samples.clone(), labels).expect("relabelled dataset")
    }
}

/// Isotropic Gaussian classes around unit-norm means, mapped into `[0, 1]^d`.
///
/// In two dimensions the means sit evenly on the unit circle (class `k` at
/// angle `2πk/C`); in higher dimensions they are random directions on the
/// unit sphere. A raw point `z` is mapped to `0.5 + z / (2 (1 + 4σ))`, which
/// sends the ball of radius `1 + 4σ` onto the unit box; the rare points
/// beyond it are clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    spread: f64,
}

impl GaussianMixture {
    pub fn new(num_classes: usize, dim: usize, spread: f64, rng: &mut Rng) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if dim < 2 {
            return Err(Error::config("need at least 2 dimensions"));
        }
        if !(spread >= 0.0) || !spread.is_finite() {
            return Err(Error::config("spread must be finite and non-negative"));
        }
        let means = (0..num_classes)
            .map(|k| {
                if dim == 2 {
                    let a = 2.0 * PI * k as f64 / num_classes as f64;
                    alloc::vec![libm::cos(a), libm::sin(a)]
                } else {
                    loop {
                        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                        let n = libm::sqrt(v.iter().map(|x| x * x).sum());
                        if n > 1e-12 {
                            break v.into_iter().map(|x| x / n).collect();
                        }
                    }
                }
            })
            .collect();
        Ok(Self { means, spread })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn to_unit_box(&self, v: f64) -> f64 {
        (0.5 + v / (2.0 * (1.0 + 4.0 * self.spread))).clamp(0.0, 1.0)
    }

    /// Mean of class `k` after mapping into the unit box.
    pub fn mapped_mean(&self, k: usize) -> Vec<f64> {
        self.means[k].iter().map(|&m| self.to_unit_box(m)).collect()
    }

    /// `per_class` draws of each class, grouped by class.
    pub fn sample(&self, per_class: usize, rng: &mut Rng) -> Result<LabeledDataset> {
        let d = self.dim();
        let mut data = Vec::with_capacity(self.num_classes() * per_class * d);
        let mut labels = Vec::with_capacity(self.num_classes() * per_class);
        for (k, mean) in self.means.iter().enumerate() {
            for _ in 0..per_class {
                for &m in mean {
                    let z = m + self.spread * rng.normal();
                    data.push(self.to_unit_box(z));
                }
                labels.push(k);
            }
        }
        LabeledDataset::new(Tensor::new(&[labels.len(), d], data)?, labels)
    }
}

/// One draw of `per_class` samples from a fresh Gaussian mixture.
pub fn make_gaussian_tasks(
    num_classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    GaussianMixture::new(num_classes, dim, spread, rng)?.sample(per_class, rng)
}

/// Ordered stages with disjoint class sets. Labels inside each stage are
/// positions in `global_class_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    stages: Vec<LabeledDataset>,
    stage_sizes: Vec<usize>,
    global_class_order: Vec<usize>,
}

impl TaskStream {
    pub fn stages(&self) -> &[LabeledDataset] {
        &self.stages
    }

    /// Number of classes introduced by each stage.
    pub fn stage_sizes(&self) -> &[usize] {
        &self.stage_sizes
    }

    /// `global_class_order[i]` is the original id of class index `i`.
    pub fn global_class_order(&self) -> &[usize] {
        &self.global_class_order
    }

    pub fn num_classes(&self) -> usize {
        self.global_class_order.len()
    }

    /// Class indices owned by stage `t`.
    pub fn stage_classes(&self, t: usize) -> core::ops::Range<usize> {
        let start: usize = self.stage_sizes[..t].iter().sum();
        start..start + self.stage_sizes[t]
    }

    /// Disjointness and coverage of the stage class sets, and labels inside
    /// each stage's block.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (t, stage) in self.stages.iter().enumerate() {
            let block = self.stage_classes(t);
            for &c in stage.class_set() {
                if !block.contains(&c) || !seen.insert(c) {
                    return Err(Error::UnknownClass(c));
                }
            }
        }
        if seen.len() != self.num_classes() {
            return Err(Error::config("stages do not cover every class"));
        }
        Ok(())
    }

    /// Splits another dataset over the same classes (a test set, typically)
    /// along this stream's order and stage sizes.
    pub fn split_like(&self, dataset: &LabeledDataset) -> Result<TaskStream> {
        split_with_sizes(dataset, &self.global_class_order, &self.stage_sizes)
    }
}

/// A uniformly random permutation of `0..num_classes`.
pub fn shuffled_class_order(num_classes: usize, rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..num_classes).collect();
    rng.shuffle(&mut order);
    order
}

fn split_with_sizes(dataset: &LabeledDataset, order: &[usize], sizes: &[usize]) -> Result<TaskStream> {
    let classes = dataset.class_set();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != classes {
        return Err(Error::config("class order must be a permutation of the dataset classes"));
    }
    if sizes.iter().sum::<usize>() != order.len() {
        return Err(Error::config("stage sizes must sum to the class count"));
    }
    let max_label = order.iter().copied().max().unwrap_or(0);
    let mut position = alloc::vec![usize::MAX; max_label + 1];
    for (i, &c) in order.iter().enumerate() {
        position[c] = i;
    }
    let relabelled = dataset.relabel(|l| position[l]);
    let mut stages = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &size in sizes {
        let end = start + size;
        stages.push(relabelled.filter(|l| (start..end).contains(&l)));
        start = end;
    }
    Ok(TaskStream {
        stages,
        stage_sizes: sizes.to_vec(),
        global_class_order: order.to_vec(),
    })
}

/// Equal consecutive blocks of classes in `order`.
pub fn split_setting1(dataset: &LabeledDataset, order: &[usize], num_stages: usize) -> Result<TaskStream> {
    let n = order.len();
    if num_stages == 0 || !n.is_multiple_of(num_stages) {
        return Err(Error::config("class count must be divisible by the stage count"));
    }
    let sizes = alloc::vec![n / num_stages; num_stages];
    split_with_sizes(dataset, order, &sizes)
}

/// Stage sizes drawn uniformly among all compositions of `num_classes` into
/// `num_stages` parts with every part in `[min, max]`.
///
/// Subtracting `min` from every part leaves a weak composition of
/// `num_classes - num_stages * min`; one is drawn uniformly by stars and bars
/// and redrawn until no part exceeds `max - min`.
pub fn setting2_sizes(
    num_classes: usize,
    num_stages: usize,
    min_per_stage: usize,
    max_per_stage: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if num_stages == 0
        || min_per_stage > max_per_stage
        || num_stages * min_per_stage > num_classes
        || num_classes > num_stages * max_per_stage
    {
        return Err(Error::config("infeasible stage size bounds"));
    }
    let slack = num_classes - num_stages * min_per_stage;
    let cap = max_per_stage - min_per_stage;
    // bars among slack + num_stages - 1 slots
    let slots = slack + num_stages - 1;
    loop {
        let mut bars: Vec<usize> = Vec::with_capacity(num_stages - 1);
        while bars.len() < num_stages - 1 {
            let b = rng.below(slots);
            if !bars.contains(&b) {
                bars.push(b);
            }
        }
        bars.sort_unstable();
        let mut parts = Vec::with_capacity(num_stages);
        let mut prev = 0usize;
        for (i, &b) in bars.iter().enumerate() {
            parts.push(b - prev - if i == 0 { 0 } else { 1 });
            prev = b;
        }
        let last_start = if bars.is_empty() { 0 } else { prev + 1 };
        parts.push(slots - last_start);
        if parts.iter().all(|&p| p <= cap) {
            return Ok(parts.into_iter().map(|p| p + min_per_stage).collect());
        }
    }
}

/// Random unequal stages with sizes from [`setting2_sizes`], classes
/// assigned along `order`.
pub fn split_setting2(
    dataset: &LabeledDataset,
    order: &[usize],
    num_stages: usize,
    min_per_stage: usize,
    max_per_stage: usize,
    rng: &mut Rng,
) -> Result<TaskStream> {
    let sizes = setting2_sizes(order.len(), num_stages, min_per_stage, max_per_stage, rng)?;
    split_with_sizes(dataset, order, &sizes)
}
