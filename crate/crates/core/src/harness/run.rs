use alloc::vec::Vec;

use crate::memory::{boundary_exemplar_select, herd_select, probability_margins, ExemplarMemory, StageClasses};
use crate::nets::{Model, ModelSnapshot};
use crate::taskstream::{split_setting1, split_setting2, GaussianMixture, LabeledDataset, TaskStream};
use crate::tensor::Rng;
use crate::{Error, Result};

use super::eval::{evaluate, Evaluator};
use super::train::{train_stage, BatchRecord, Instrumentation, StageInput};
use super::{Selection, StreamConfig, TrainConfig};

// Rng stream ids derived from the run seed.
const STREAM_DATA: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_INIT: u64 = 10;
const STREAM_TRAIN: u64 = 100;
const STREAM_EVAL: u64 = 1000;

/// Monotonic seconds, for stage timing.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that never moves; timings are reported as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy)]
pub struct Runtime<'a> {
    pub evaluator: &'a dyn Evaluator,
    pub clock: &'a dyn Clock,
}

/// Train and test streams cut with the same class order and stage sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinualData {
    pub train: TaskStream,
    pub test: TaskStream,
}

/// Orders the classes of `train` with a seeded shuffle and splits both sets
/// along it.
pub fn build_streams(
    train: &LabeledDataset,
    test: &LabeledDataset,
    stream: &StreamConfig,
    seed: u64,
) -> Result<ContinualData> {
    if train.class_set() != test.class_set() {
        return Err(Error::config("train and test sets cover different classes"));
    }
    let mut order = train.class_set().to_vec();
    Rng::derive(seed, STREAM_ORDER).shuffle(&mut order);
    let train = if stream.setting == 1 {
        split_setting1(train, &order, stream.stages)?
    } else {
        split_setting2(
            train,
            &order,
            stream.stages,
            stream.min_per_stage,
            stream.max_per_stage,
            &mut Rng::derive(seed, STREAM_SPLIT),
        )?
    };
    let test = train.split_like(test)?;
    Ok(ContinualData { train, test })
}

/// Gaussian train and test sets drawn from one mixture, then streamed.
pub fn build_gauss_streams(stream: &StreamConfig, seed: u64) -> Result<ContinualData> {
    stream.validate()?;
    let mut rng = Rng::derive(seed, STREAM_DATA);
    let mixture = GaussianMixture::new(stream.num_classes, stream.dim, stream.spread, &mut rng)?;
    let train = mixture.sample(stream.per_class, &mut rng)?;
    let test = mixture.sample(stream.test_per_class, &mut rng)?;
    build_streams(&train, &test, stream, seed)
}

/// Metrics after one stage, over the test points of every seen class.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMetrics {
    /// 1-based.
    pub stage: usize,
    pub seen_classes: usize,
    pub sa: f64,
    pub ra_pgd: f64,
    /// Over classes from earlier stages; `None` at the first stage.
    pub old_task_sa: Option<f64>,
    pub old_task_ra: Option<f64>,
    pub new_task_sa: f64,
    pub new_task_ra: f64,
    /// Robust accuracy on each stage's classes so far.
    pub task_ra: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: Vec<StageMetrics>,
    pub model: Model,
    pub memory: ExemplarMemory,
    pub instrumentation: Instrumentation,
    /// Fingerprint of the teacher used at each stage.
    pub teacher_fingerprints: Vec<Option<u64>>,
    /// Fingerprint of the model at the end of each stage.
    pub stage_end_fingerprints: Vec<u64>,
    pub last_batches: Vec<Option<BatchRecord>>,
}

/// Stores exemplars for each class in `classes`, drawn from that class's rows
/// of `data`, then rebalances every class to the new quota.
pub fn update_memory(
    memory: &mut ExemplarMemory,
    model: &Model,
    data: &LabeledDataset,
    classes: core::ops::Range<usize>,
    seen: usize,
    selection: Selection,
) -> Result<()> {
    let quota = memory.quota(seen);
    for class in classes {
        let idx = data.class_indices(class);
        if idx.is_empty() {
            continue;
        }
        let part = data.subset(&idx);
        let picks = match selection {
            Selection::Herding => herd_select(&model.extract_features(part.samples())?, quota)?,
            Selection::Margin => {
                boundary_exemplar_select(&probability_margins(&model.probabilities(part.samples())?), quota)?
            }
        };
        let samples = picks.into_iter().map(|i| part.samples().row(i).to_vec()).collect();
        memory.insert_class(class, samples)?;
    }
    memory.rebalance(seen);
    memory.check_invariants(seen)
}

/// Runs the whole stream: per stage, snapshot the teacher, grow the head,
/// train on new data plus exemplars, refresh the exemplar memory and
/// evaluate clean and PGD accuracy on every seen class.
pub fn run_continual(data: &ContinualData, config: &TrainConfig, runtime: Runtime<'_>) -> Result<RunOutcome> {
    config.validate()?;
    let stages = data.train.stages();
    if stages.is_empty() || data.test.stages().len() != stages.len() {
        return Err(Error::config("train and test streams need the same non-zero stage count"));
    }
    let dim = stages[0].dim();
    let mut dims = Vec::with_capacity(config.hidden_layers.len() + 2);
    dims.push(dim);
    dims.extend_from_slice(&config.hidden_layers);
    dims.push(data.train.stage_sizes()[0]);
    let mut model = Model::init(&dims, &mut Rng::derive(config.seed, STREAM_INIT))?;
    let mut memory = ExemplarMemory::new(config.memory_capacity, dim);
    let mut instrumentation = Instrumentation::default();
    let mut outcome_metrics = Vec::with_capacity(stages.len());
    let mut teacher_fingerprints = Vec::with_capacity(stages.len());
    let mut stage_end_fingerprints = Vec::with_capacity(stages.len());
    let mut last_batches = Vec::with_capacity(stages.len());
    let mut test_seen = LabeledDataset::empty(dim);

    for (t, stage) in stages.iter().enumerate() {
        let started = runtime.clock.seconds();
        let block = data.train.stage_classes(t);
        let classes = StageClasses::new(block.start, block.end)?;
        let teacher = (t > 0).then(|| ModelSnapshot::of(&model));
        if t > 0 {
            model = model.expand_head(classes.seen)?;
        }
        teacher_fingerprints.push(teacher.as_ref().map(ModelSnapshot::fingerprint));

        let replay = memory.samples();
        let train_data = stage.concat(&memory.to_dataset()?)?;
        let input = StageInput {
            data: &train_data,
            classes,
            teacher: teacher.as_ref(),
            memory: &replay,
        };
        let mut rng = Rng::derive(config.seed, STREAM_TRAIN + t as u64);
        let outcome = train_stage(&mut model, input, config, &mut rng, &mut instrumentation)?;
        last_batches.push(outcome.last_batch);
        stage_end_fingerprints.push(model.fingerprint());

        update_memory(&mut memory, &model, stage, block.clone(), classes.seen, config.method.selection())?;

        test_seen = test_seen.concat(&data.test.stages()[t])?;
        let eval_seed = Rng::derive(config.seed, STREAM_EVAL + t as u64).next_u64();
        let e = evaluate(&model, &test_seen, &config.eval_attack, eval_seed, runtime.evaluator)?;
        let task_ra = (0..=t)
            .map(|k| {
                let r = data.train.stage_classes(k);
                e.ra_where(|l| r.contains(&l)).unwrap_or(0.0)
            })
            .collect();
        outcome_metrics.push(StageMetrics {
            stage: t + 1,
            seen_classes: classes.seen,
            sa: e.sa(),
            ra_pgd: e.ra(),
            old_task_sa: e.sa_where(|l| classes.is_old(l)),
            old_task_ra: e.ra_where(|l| classes.is_old(l)),
            new_task_sa: e.sa_where(|l| !classes.is_old(l)).unwrap_or(0.0),
            new_task_ra: e.ra_where(|l| !classes.is_old(l)).unwrap_or(0.0),
            task_ra,
            seconds: runtime.clock.seconds() - started,
        });
    }

    Ok(RunOutcome {
        metrics: outcome_metrics,
        model,
        memory,
        instrumentation,
        teacher_fingerprints,
        stage_end_fingerprints,
        last_batches,
    })
}
