//! On-disk formats.
//!
//! Models are a single little-endian binary file:
//!
//! ```text
//! magic   8 bytes  "TABAMODL"
//! version u32      1
//! n_dims  u32
//! dims    n_dims x u32
//! params  f64 x parameter_count   (per layer: weight row-major, then bias)
//! ```
//!
//! Datasets and exemplar memories are a JSON manifest next to a flat
//! little-endian `f64` payload holding the rows in order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taba_core::memory::ExemplarMemory;
use taba_core::nets::Model;
use taba_core::taskstream::LabeledDataset;
use taba_core::Tensor;

use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"TABAMODL";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(model: &Model) -> Vec<u8> {
    let dims = model.layer_dims();
    let params = model.flat_parameters();
    let mut out = Vec::with_capacity(16 + 4 * dims.len() + 8 * params.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("model file is truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let n_dims = r.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Format(format!("implausible layer count {n_dims}")));
    }
    let dims = (0..n_dims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let count: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if r.bytes.len() != 8 * count {
        return Err(Error::Format(format!(
            "expected {count} parameters, found {} bytes",
            r.bytes.len()
        )));
    }
    let params: Vec<f64> = r
        .bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut rng = taba_core::Rng::new(0);
    let mut model = Model::init(&dims, &mut rng)?;
    model.set_flat_parameters(&params)?;
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    Ok(fs::write(path, encode_model(model))?)
}

pub fn load_model(path: &Path) -> Result<Model> {
    decode_model(&fs::read(path)?)
}

fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn decode_f64s(bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Payload path: the manifest path with its extension replaced by `bin`.
fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn payload_name(manifest: &Path) -> String {
    payload_path(manifest)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub dim: usize,
    pub labels: Vec<usize>,
    pub data: String,
}

/// Writes `<path>` (JSON) and `<path>.bin` (rows).
pub fn save_dataset(data: &LabeledDataset, path: &Path) -> Result<()> {
    let manifest = DatasetManifest {
        version: FORMAT_VERSION,
        dim: data.dim(),
        labels: data.labels().to_vec(),
        data: payload_name(path),
    };
    fs::write(payload_path(path), encode_f64s(data.samples().data()))?;
    fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    let payload = path.with_file_name(&manifest.data);
    let n = manifest.labels.len();
    let values = decode_f64s(&fs::read(payload)?, n * manifest.dim)?;
    Ok(LabeledDataset::new(Tensor::new(&[n, manifest.dim], values)?, manifest.labels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryManifest {
    pub version: u32,
    pub capacity: usize,
    pub dim: usize,
    /// `(class, count)` in storage order.
    pub classes: Vec<(usize, usize)>,
    pub data: String,
}

/// Writes `<path>` (JSON) and `<path>.bin` (exemplars, class by class in
/// priority order).
pub fn save_memory(memory: &ExemplarMemory, path: &Path) -> Result<()> {
    let classes: Vec<(usize, usize)> = memory
        .classes()
        .map(|c| (c, memory.class_samples(c).len()))
        .collect();
    let values: Vec<f64> = memory
        .classes()
        .flat_map(|c| memory.class_samples(c).iter().flatten().copied())
        .collect();
    let manifest = MemoryManifest {
        version: FORMAT_VERSION,
        capacity: memory.capacity(),
        dim: memory.dim(),
        classes,
        data: payload_name(path),
    };
    fs::write(payload_path(path), encode_f64s(&values))?;
    fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_memory(path: &Path) -> Result<ExemplarMemory> {
    let manifest: MemoryManifest = serde_json::from_slice(&fs::read(path)?)?;
    let total: usize = manifest.classes.iter().map(|&(_, n)| n).sum();
    let values = decode_f64s(&fs::read(path.with_file_name(&manifest.data))?, total * manifest.dim)?;
    let mut rows = values.chunks(manifest.dim.max(1)).map(<[f64]>::to_vec);
    let mut per_class = BTreeMap::new();
    for &(class, n) in &manifest.classes {
        per_class.insert(class, rows.by_ref().take(n).collect());
    }
    Ok(ExemplarMemory::from_parts(manifest.capacity, manifest.dim, per_class)?)
}
