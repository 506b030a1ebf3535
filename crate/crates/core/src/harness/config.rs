use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackConfig;
use crate::augment::AugmentConfig;
use crate::losses::DistillConfig;
use crate::{Error, Result};

/// Training recipes compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Clean training with distillation and herded exemplars.
    Icarl,
    /// Adversarial training with distillation and herded exemplars.
    Rcl,
    /// As `Rcl`, but exemplars are the smallest-margin samples.
    RclBoundaryExemplar,
    /// `Rcl` plus Mixup over the whole stage data.
    RclMixup,
    /// `Rcl` plus task-aware boundary augmentation.
    RclTaba,
}

/// How exemplars are chosen for a finished class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Herding,
    Margin,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Icarl,
        Method::Rcl,
        Method::RclBoundaryExemplar,
        Method::RclMixup,
        Method::RclTaba,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Icarl => "icarl",
            Method::Rcl => "rcl",
            Method::RclBoundaryExemplar => "rcl_boundary_exemplar",
            Method::RclMixup => "rcl_mixup",
            Method::RclTaba => "rcl_taba",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn adversarial(self) -> bool {
        self != Method::Icarl
    }

    pub fn augments(self) -> bool {
        matches!(self, Method::RclMixup | Method::RclTaba)
    }

    pub fn selection(self) -> Selection {
        match self {
            Method::RclBoundaryExemplar => Selection::Margin,
            _ => Selection::Herding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Gauss,
    Cifar10,
    Cifar100,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Gauss => "gauss",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Cifar100 => "cifar100",
        }
    }

    pub fn parse(name: &str) -> Option<DatasetKind> {
        [DatasetKind::Gauss, DatasetKind::Cifar10, DatasetKind::Cifar100]
            .into_iter()
            .find(|d| d.name() == name)
    }
}

/// Which data to stream and how to cut it into stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub dataset: DatasetKind,
    /// 1: equal class blocks; 2: random sizes in `[min_per_stage, max_per_stage]`.
    pub setting: u8,
    pub stages: usize,
    /// Gaussian streams only.
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub spread: f64,
    pub min_per_stage: usize,
    pub max_per_stage: usize,
    /// Directory holding the CIFAR binary batches.
    pub data_dir: Option<String>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Gauss,
            setting: 1,
            stages: 5,
            num_classes: 10,
            dim: 2,
            per_class: 100,
            test_per_class: 100,
            spread: 0.1,
            min_per_stage: 1,
            max_per_stage: 4,
            data_dir: None,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.setting, 1 | 2) {
            return Err(Error::config("setting must be 1 or 2"));
        }
        if self.stages == 0 {
            return Err(Error::config("stages must be at least 1"));
        }
        if self.dataset == DatasetKind::Gauss {
            if self.num_classes < 2 || self.dim < 2 {
                return Err(Error::config("gaussian streams need >= 2 classes and >= 2 dimensions"));
            }
            if self.per_class == 0 || self.test_per_class == 0 {
                return Err(Error::config("per_class and test_per_class must be positive"));
            }
            if !(self.spread >= 0.0 && self.spread.is_finite()) {
                return Err(Error::config("spread must be finite and non-negative"));
            }
        } else if self.data_dir.is_none() {
            return Err(Error::config("cifar streams need data_dir"));
        }
        if self.setting == 1 && self.dataset == DatasetKind::Gauss && !self.num_classes.is_multiple_of(self.stages) {
            return Err(Error::config("class count must be divisible by the stage count"));
        }
        if self.setting == 2 && self.min_per_stage > self.max_per_stage {
            return Err(Error::config("min_per_stage exceeds max_per_stage"));
        }
        Ok(())
    }
}

/// Full run configuration. Field names double as JSON keys and CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub hidden_layers: Vec<usize>,
    pub memory_capacity: usize,
    pub train_attack: AttackConfig,
    pub eval_attack: AttackConfig,
    /// Switches and `m'` for the augmenting methods; ignored otherwise.
    pub augment: AugmentConfig,
    pub distill: DistillConfig,
    pub stream: StreamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_method(Method::RclTaba)
    }
}

impl TrainConfig {
    /// Desk-scale defaults with the augmentation switches matching `method`.
    pub fn for_method(method: Method) -> Self {
        let augment = match method {
            Method::RclMixup => AugmentConfig::mixup(16),
            _ => AugmentConfig::taba(16),
        };
        Self {
            method,
            seed: 0,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            hidden_layers: vec![64, 64],
            memory_capacity: 2000,
            train_attack: AttackConfig::default(),
            eval_attack: AttackConfig {
                random_init: false,
                ..AttackConfig::default()
            },
            augment,
            distill: DistillConfig::default(),
            stream: StreamConfig::default(),
        }
    }

    /// Same config under another method, re-deriving the augmentation
    /// switches.
    pub fn with_method(&self, method: Method) -> Self {
        let mut c = self.clone();
        c.method = method;
        let m_prime = self.augment.m_prime;
        c.augment = match method {
            Method::RclMixup => AugmentConfig::mixup(m_prime),
            Method::RclTaba if self.method == Method::RclTaba => self.augment,
            _ => AugmentConfig::taba(m_prime),
        };
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::config("need at least one non-empty hidden layer"));
        }
        self.train_attack.validate()?;
        self.eval_attack.validate()?;
        self.augment.validate()?;
        self.distill.validate()?;
        if self.method == Method::RclMixup
            && (self.augment.use_boundary || self.augment.task_aware || self.augment.restrict_lambda)
        {
            return Err(Error::config("rcl_mixup needs every augmentation switch off"));
        }
        if self.method.augments() && self.augment.m_prime == 0 {
            return Err(Error::config("augmenting methods need m_prime >= 1"));
        }
        self.stream.validate()
    }
}
