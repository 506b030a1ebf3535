//! Stage-by-stage robust continual training, evaluation and run
//! configuration.
//!
//! [`run_continual`] drives a whole stream: teacher snapshot, head
//! expansion, [`train_stage`], exemplar update and evaluation for every
//! stage. Evaluation fans out through an [`Evaluator`] and timing through a
//! [`Clock`], so the std crate can plug in threads and a wall clock without
//! touching the numerics.

mod config;
mod eval;
mod run;
mod train;

pub use config::{DatasetKind, Method, Selection, StreamConfig, TrainConfig};
pub use eval::{
    evaluate, evaluate_ra_pgd, evaluate_sa, Evaluation, Evaluator, SerialEvaluator, EVAL_CHUNK,
};
pub use run::{
    build_gauss_streams, build_streams, run_continual, update_memory, Clock, ContinualData, NoClock,
    RunOutcome, Runtime, StageMetrics,
};
pub use train::{train_stage, BatchRecord, Instrumentation, StageInput, StageOutcome};
