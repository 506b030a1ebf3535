//! CIFAR binary batches.
//!
//! CIFAR-10 records are 1 label byte followed by 3072 pixel bytes
//! (1024 red, 1024 green, 1024 blue, row-major 32x32). CIFAR-100 records carry
//! a coarse and a fine label byte before the pixels; the fine label is used.
//! Pixels are scaled to `[0, 1]` by dividing by 255.

use std::fs;
use std::path::Path;

use taba_core::taskstream::LabeledDataset;
use taba_core::Tensor;

use crate::{Error, Result};

pub const PIXELS: usize = 3072;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarKind {
    Cifar10,
    Cifar100,
}

impl CifarKind {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarKind::Cifar10 => 1,
            CifarKind::Cifar100 => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + PIXELS
    }

    pub fn num_classes(self) -> usize {
        match self {
            CifarKind::Cifar10 => 10,
            CifarKind::Cifar100 => 100,
        }
    }

    fn train_files(self) -> &'static [&'static str] {
        match self {
            CifarKind::Cifar10 => &[
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            CifarKind::Cifar100 => &["train.bin"],
        }
    }

    fn test_file(self) -> &'static str {
        match self {
            CifarKind::Cifar10 => "test_batch.bin",
            CifarKind::Cifar100 => "test.bin",
        }
    }
}

/// Parses the records in `bytes`.
pub fn parse_cifar(bytes: &[u8], kind: CifarKind) -> Result<LabeledDataset> {
    let rec = kind.record_len();
    if bytes.is_empty() || bytes.len() % rec != 0 {
        return Err(Error::CorruptCifar(format!(
            "{} bytes is not a positive multiple of the {rec}-byte record",
            bytes.len()
        )));
    }
    let n = bytes.len() / rec;
    let mut data = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    for record in bytes.chunks_exact(rec) {
        let label = record[kind.label_bytes() - 1] as usize;
        if label >= kind.num_classes() {
            return Err(Error::CorruptCifar(format!("label {label} out of range")));
        }
        labels.push(label);
        data.extend(record[kind.label_bytes()..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok(LabeledDataset::new(Tensor::new(&[n, PIXELS], data)?, labels)?)
}

pub fn load_cifar_file(path: &Path, kind: CifarKind) -> Result<LabeledDataset> {
    parse_cifar(&fs::read(path)?, kind)
}

/// Train and test sets from the standard file names under `dir`.
pub fn load_cifar(dir: &Path, kind: CifarKind) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train = LabeledDataset::empty(PIXELS);
    for name in kind.train_files() {
        train = train.concat(&load_cifar_file(&dir.join(name), kind)?)?;
    }
    let test = load_cifar_file(&dir.join(kind.test_file()), kind)?;
    Ok((train, test))
}
