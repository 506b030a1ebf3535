//! Exemplar memory, herding and margin-based exemplar selection, and the
//! per-epoch boundary set.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::taskstream::LabeledDataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// A clean sample with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// Old/new split of the classes seen so far. Class indices are contiguous:
/// old classes are `0..old`, new classes are `old..seen`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageClasses {
    pub old: usize,
    pub seen: usize,
}

impl StageClasses {
    pub fn new(old: usize, seen: usize) -> Result<Self> {
        if old > seen || seen == 0 {
            return Err(Error::config("need old <= seen and seen > 0"));
        }
        Ok(Self { old, seen })
    }

    pub fn is_old(&self, class: usize) -> bool {
        class < self.old
    }

    pub fn contains(&self, class: usize) -> bool {
        class < self.seen
    }

    pub fn new_classes(&self) -> core::ops::Range<usize> {
        self.old..self.seen
    }
}

/// Greedy herding: repeatedly picks the sample that keeps the running mean of
/// the picked features closest (L2) to the mean of all features.
///
/// Returns `min(quota, n)` row indices in pick order; ties resolve to the
/// lowest index.
pub fn herd_select(features: &Tensor, quota: usize) -> Result<Vec<usize>> {
    if features.rank() != 2 || features.rows() == 0 {
        return Err(Error::Empty("features"));
    }
    let (n, d) = (features.rows(), features.cols());
    let mut mu = alloc::vec![0.0; d];
    for row in features.row_iter() {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n as f64;
    }

    let take = quota.min(n);
    let mut picked = Vec::with_capacity(take);
    let mut used = alloc::vec![false; n];
    let mut running = alloc::vec![0.0; d];
    for k in 1..=take {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in features.row_iter().enumerate() {
            if used[i] {
                continue;
            }
            let dist: f64 = mu
                .iter()
                .zip(&running)
                .zip(row)
                .map(|((m, s), v)| {
                    let diff = m - (s + v) / k as f64;
                    diff * diff
                })
                .sum();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        let (i, _) = best.expect("an unpicked row remains");
        used[i] = true;
        for (s, v) in running.iter_mut().zip(features.row(i)) {
            *s += v;
        }
        picked.push(i);
    }
    Ok(picked)
}

/// Indices of the `quota` smallest margins (top-1 minus top-2 probability),
/// smallest first; ties resolve to the lowest index.
pub fn boundary_exemplar_select(margins: &[f64], quota: usize) -> Result<Vec<usize>> {
    if margins.iter().any(|m| !m.is_finite()) {
        return Err(Error::config("margins must be finite"));
    }
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
    order.truncate(quota);
    Ok(order)
}

/// Top-1 minus top-2 of each probability row.
pub fn probability_margins(probs: &Tensor) -> Vec<f64> {
    probs
        .row_iter()
        .map(|row| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &p in row {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            if second == f64::NEG_INFINITY {
                first
            } else {
                first - second
            }
        })
        .collect()
}

/// Fixed-capacity store of old-class samples, kept per class in selection
/// priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarMemory {
    capacity: usize,
    dim: usize,
    per_class: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl ExemplarMemory {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self {
            capacity,
            dim,
            per_class: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-class quota once `seen_classes` classes are known.
    pub fn quota(&self, seen_classes: usize) -> usize {
        self.capacity / seen_classes.max(1)
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_class.keys().copied()
    }

    pub fn class_samples(&self, class: usize) -> &[Vec<f64>] {
        self.per_class.get(&class).map_or(&[], Vec::as_slice)
    }

    /// Stores the samples of one class, first entry highest priority.
    /// Replaces anything previously stored for that class.
    pub fn insert_class(&mut self, class: usize, samples: Vec<Vec<f64>>) -> Result<()> {
        if let Some(bad) = samples.iter().find(|s| s.len() != self.dim) {
            return Err(Error::LengthMismatch(self.dim, bad.len()));
        }
        self.per_class.insert(class, samples);
        Ok(())
    }

    /// Truncates every class to `floor(capacity / seen_classes)`, keeping the
    /// highest-priority prefix.
    pub fn rebalance(&mut self, seen_classes: usize) {
        let quota = self.quota(seen_classes);
        for samples in self.per_class.values_mut() {
            samples.truncate(quota);
        }
    }

    /// Every stored sample in class order.
    pub fn samples(&self) -> Vec<Sample> {
        self.per_class
            .iter()
            .flat_map(|(&label, xs)| xs.iter().map(move |x| Sample { x: x.clone(), label }))
            .collect()
    }

    /// Capacity, quota and label consistency for `seen_classes`.
    pub fn check_invariants(&self, seen_classes: usize) -> Result<()> {
        if self.len() > self.capacity {
            return Err(Error::config("memory exceeds capacity"));
        }
        let quota = self.quota(seen_classes);
        for (&class, xs) in &self.per_class {
            if class >= seen_classes {
                return Err(Error::UnknownClass(class));
            }
            if xs.len() > quota {
                return Err(Error::config("class exceeds its quota"));
            }
        }
        Ok(())
    }

    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::from_samples(&self.samples(), self.dim)
    }

    /// Rebuilds a memory from stored parts (used by deserialisation).
    pub fn from_parts(
        capacity: usize,
        dim: usize,
        per_class: BTreeMap<usize, Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let mut m = Self::new(capacity, dim);
        for (class, xs) in per_class {
            m.insert_class(class, xs)?;
        }
        if m.len() > capacity {
            return Err(Error::config("memory exceeds capacity"));
        }
        Ok(m)
    }
}

/// Clean samples misclassified under attack during one epoch, split by
/// old/new class membership.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet {
    pub old: Vec<Sample>,
    pub new: Vec<Sample>,
    pub epoch_index: usize,
}

impl BoundarySet {
    pub fn empty(epoch_index: usize) -> Self {
        Self {
            epoch_index,
            ..Self::default()
        }
    }

    /// Every sample of `data`, partitioned by label (the epoch-0 pool).
    pub fn from_dataset(data: &LabeledDataset, classes: StageClasses) -> Result<Self> {
        let mut set = Self::empty(0);
        for i in 0..data.len() {
            let label = data.labels()[i];
            set.push(data.samples().row(i).to_vec(), label, classes)?;
        }
        Ok(set)
    }

    fn push(&mut self, x: Vec<f64>, label: usize, classes: StageClasses) -> Result<()> {
        if !classes.contains(label) {
            return Err(Error::UnknownClass(label));
        }
        let part = if classes.is_old(label) {
            &mut self.old
        } else {
            &mut self.new
        };
        part.push(Sample { x, label });
        Ok(())
    }

    /// Appends the clean sample when the adversarial prediction is wrong.
    /// Returns whether the sample was added.
    pub fn update(
        &mut self,
        sample: &[f64],
        label: usize,
        predicted: usize,
        classes: StageClasses,
    ) -> Result<bool> {
        if !classes.contains(label) {
            return Err(Error::UnknownClass(label));
        }
        if predicted == label {
            return Ok(false);
        }
        self.push(sample.to_vec(), label, classes)?;
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.old.len() + self.new.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
