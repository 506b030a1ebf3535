//! The `taba` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 failure
//! while running.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use taba_core::harness::{
    build_gauss_streams, build_streams, evaluate, run_continual, Clock, ContinualData, DatasetKind, Method,
    NoClock, Runtime, TrainConfig,
};
use taba_core::losses::StudentOldProbs;
use taba_core::taskstream::LabeledDataset;

use crate::cifar::{load_cifar, CifarKind};
use crate::formats::{load_dataset, load_model, save_dataset, save_memory, save_model};
use crate::report::{emit_report, metrics_csv};
use crate::runtime::{ThreadedEvaluator, WallClock};
use crate::selftest::run_selftest;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "taba", version, about = "Robust class-incremental training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a class-incremental stream and write a report.
    Run(RunArgs),
    /// Clean and PGD accuracy of a saved model on a saved dataset.
    Eval(EvalArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with TrainConfig fields; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "taba-out")]
    pub out: PathBuf,
    /// Record wall-clock seconds per stage (otherwise reported as 0).
    #[arg(long)]
    pub timing: bool,
    /// Evaluation worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `run`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset manifest written by `run` (or any dataset manifest).
    #[arg(long)]
    pub data: PathBuf,
    /// Config whose `eval_attack` and `seed` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}`"))
}

fn parse_dataset(s: &str) -> Result<DatasetKind, String> {
    DatasetKind::parse(s).ok_or_else(|| format!("unknown dataset `{s}`"))
}

fn parse_student(s: &str) -> Result<StudentOldProbs, String> {
    match s {
        "renormalized" => Ok(StudentOldProbs::Renormalized),
        "full_softmax_slice" => Ok(StudentOldProbs::FullSoftmaxSlice),
        _ => Err(format!("unknown student_old_probs `{s}`")),
    }
}

/// One flag per configuration field.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Comma-separated hidden widths, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    pub hidden_layers: Option<Vec<usize>>,
    #[arg(long)]
    pub memory_capacity: Option<usize>,

    #[arg(long)]
    pub train_epsilon: Option<f64>,
    #[arg(long)]
    pub train_step_size: Option<f64>,
    #[arg(long)]
    pub train_steps: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub train_random_init: Option<bool>,
    #[arg(long)]
    pub eval_epsilon: Option<f64>,
    #[arg(long)]
    pub eval_step_size: Option<f64>,
    #[arg(long)]
    pub eval_steps: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub eval_random_init: Option<bool>,
    /// Data box for both attacks, `low,high`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub data_bounds: Option<Vec<f64>>,

    #[arg(long)]
    pub m_prime: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub use_boundary: Option<bool>,
    #[arg(long, action = ArgAction::Set)]
    pub task_aware: Option<bool>,
    #[arg(long, action = ArgAction::Set)]
    pub restrict_lambda: Option<bool>,

    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_parser = parse_student)]
    pub student_old_probs: Option<StudentOldProbs>,

    #[arg(long, value_parser = parse_dataset)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub setting: Option<u8>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub min_per_stage: Option<usize>,
    #[arg(long)]
    pub max_per_stage: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<String>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Overrides {
    /// Applies every given flag. A new method without explicit switches
    /// brings its own augmentation preset.
    pub fn apply(self, mut c: TrainConfig, augment_given: bool) -> TrainConfig {
        if let Some(m) = self.method {
            let switches_given =
                augment_given || self.use_boundary.is_some() || self.task_aware.is_some() || self.restrict_lambda.is_some();
            c = if switches_given {
                TrainConfig { method: m, ..c }
            } else {
                c.with_method(m)
            };
        }
        set(&mut c.seed, self.seed);
        set(&mut c.epochs, self.epochs);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.learning_rate, self.learning_rate);
        set(&mut c.momentum, self.momentum);
        set(&mut c.hidden_layers, self.hidden_layers);
        set(&mut c.memory_capacity, self.memory_capacity);

        set(&mut c.train_attack.epsilon, self.train_epsilon);
        set(&mut c.train_attack.step_size, self.train_step_size);
        set(&mut c.train_attack.steps, self.train_steps);
        set(&mut c.train_attack.random_init, self.train_random_init);
        set(&mut c.eval_attack.epsilon, self.eval_epsilon);
        set(&mut c.eval_attack.step_size, self.eval_step_size);
        set(&mut c.eval_attack.steps, self.eval_steps);
        set(&mut c.eval_attack.random_init, self.eval_random_init);
        if let Some(b) = self.data_bounds {
            c.train_attack.data_bounds = (b[0], b[1]);
            c.eval_attack.data_bounds = (b[0], b[1]);
        }

        set(&mut c.augment.m_prime, self.m_prime);
        let ub = self.use_boundary.unwrap_or(c.augment.use_boundary);
        let ta = self.task_aware.unwrap_or(c.augment.task_aware);
        let rl = self.restrict_lambda.unwrap_or(c.augment.restrict_lambda);
        c.augment = taba_core::augment::AugmentConfig::new(ub, ta, rl, c.augment.m_prime);

        set(&mut c.distill.temperature, self.temperature);
        set(&mut c.distill.student_old_probs, self.student_old_probs);

        let s = &mut c.stream;
        set(&mut s.dataset, self.dataset);
        set(&mut s.setting, self.setting);
        set(&mut s.stages, self.stages);
        set(&mut s.num_classes, self.num_classes);
        set(&mut s.dim, self.dim);
        set(&mut s.per_class, self.per_class);
        set(&mut s.test_per_class, self.test_per_class);
        set(&mut s.spread, self.spread);
        set(&mut s.min_per_stage, self.min_per_stage);
        set(&mut s.max_per_stage, self.max_per_stage);
        if self.data_dir.is_some() {
            s.data_dir = self.data_dir;
        }
        c
    }
}

enum Failure {
    Config(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<taba_core::Error> for Failure {
    fn from(e: taba_core::Error) -> Self {
        Error::from(e).into()
    }
}

/// Reads a config file. Returns the config and whether it set `augment`.
pub fn load_config(path: &Path) -> Result<(TrainConfig, bool), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let augment_given = value.get("augment").is_some();
    let mut config: TrainConfig = serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?;
    if !augment_given {
        config = config.with_method(config.method);
    }
    Ok((config, augment_given))
}

fn resolve(config: &Option<PathBuf>, overrides: Overrides) -> Result<TrainConfig, Failure> {
    let (base, augment_given) = match config {
        Some(p) => load_config(p).map_err(Failure::Config)?,
        None => (TrainConfig::default(), false),
    };
    let c = overrides.apply(base, augment_given);
    c.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(c)
}

/// Builds the train/test streams a config asks for.
pub fn load_streams(config: &TrainConfig) -> crate::Result<ContinualData> {
    let kind = match config.stream.dataset {
        DatasetKind::Gauss => return Ok(build_gauss_streams(&config.stream, config.seed)?),
        DatasetKind::Cifar10 => CifarKind::Cifar10,
        DatasetKind::Cifar100 => CifarKind::Cifar100,
    };
    let dir = config.stream.data_dir.as_deref().unwrap_or(".");
    let (train, test) = load_cifar(Path::new(dir), kind)?;
    Ok(build_streams(&train, &test, &config.stream, config.seed)?)
}

fn evaluator(threads: Option<usize>) -> ThreadedEvaluator {
    threads.map_or_else(ThreadedEvaluator::default, |threads| ThreadedEvaluator { threads })
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let config = resolve(&args.config, args.overrides)?;
    let data = load_streams(&config)?;
    let evaluator = evaluator(args.threads);
    let wall = WallClock::default();
    let clock: &dyn Clock = if args.timing { &wall } else { &NoClock };
    let outcome = run_continual(
        &data,
        &config,
        Runtime {
            evaluator: &evaluator,
            clock,
        },
    )?;
    let out = &args.out;
    emit_report(
        &outcome.metrics,
        &config,
        data.train.global_class_order(),
        data.train.stage_sizes(),
        out,
    )?;
    save_model(&outcome.model, &out.join("model.bin")).map_err(Failure::Runtime)?;
    save_memory(&outcome.memory, &out.join("memory.json")).map_err(Failure::Runtime)?;
    let mut test = LabeledDataset::empty(data.test.stages()[0].dim());
    for stage in data.test.stages() {
        test = test.concat(stage)?;
    }
    save_dataset(&test, &out.join("test.json")).map_err(Failure::Runtime)?;
    print!("{}", String::from_utf8_lossy(&metrics_csv(&outcome.metrics)?));
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let config = resolve(&args.config, args.overrides)?;
    let model = load_model(&args.model).map_err(Failure::Runtime)?;
    let data = load_dataset(&args.data).map_err(Failure::Runtime)?;
    let e = evaluate(&model, &data, &config.eval_attack, config.seed, &evaluator(args.threads))?;
    let summary = serde_json::json!({
        "n": data.len(),
        "SA": e.sa(),
        "RA_PGD": e.ra(),
    });
    println!("{summary}");
    Ok(())
}

fn cmd_selftest() -> Result<(), Failure> {
    let checks = run_selftest()?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {:<26} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Runtime(Error::Format(format!("{failed} check(s) failed"))));
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("invalid config: {msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}
