//! Run reports: a JSON manifest and a per-stage CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use taba_core::harness::{StageMetrics, TrainConfig};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub taba: String,
    pub format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            taba: env!("CARGO_PKG_VERSION").to_string(),
            format: crate::formats::FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub seen_classes: usize,
    pub sa: f64,
    pub ra_pgd: f64,
    pub old_task_sa: Option<f64>,
    pub old_task_ra: Option<f64>,
    pub new_task_sa: f64,
    pub new_task_ra: f64,
    pub task_ra: Vec<f64>,
}

impl From<&StageMetrics> for StageSummary {
    fn from(m: &StageMetrics) -> Self {
        Self {
            stage: m.stage,
            seen_classes: m.seen_classes,
            sa: m.sa,
            ra_pgd: m.ra_pgd,
            old_task_sa: m.old_task_sa,
            old_task_ra: m.old_task_ra,
            new_task_sa: m.new_task_sa,
            new_task_ra: m.new_task_ra,
            task_ra: m.task_ra.clone(),
        }
    }
}

/// Everything needed to rerun and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub seed: u64,
    /// Original class id of every class index.
    pub class_order: Vec<usize>,
    pub stage_sizes: Vec<usize>,
    pub versions: Versions,
    pub stages: Vec<StageSummary>,
}

#[derive(Debug, Serialize)]
struct CsvRow {
    stage: usize,
    seen_classes: usize,
    #[serde(rename = "SA")]
    sa: f64,
    #[serde(rename = "RA_PGD")]
    ra_pgd: f64,
    #[serde(rename = "old_task_RA")]
    old_task_ra: Option<f64>,
    #[serde(rename = "new_task_RA")]
    new_task_ra: f64,
    seconds: f64,
}

/// CSV text with one row per stage.
pub fn metrics_csv(metrics: &[StageMetrics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(CsvRow {
            stage: m.stage,
            seen_classes: m.seen_classes,
            sa: m.sa,
            ra_pgd: m.ra_pgd,
            old_task_ra: m.old_task_ra,
            new_task_ra: m.new_task_ra,
            seconds: m.seconds,
        })?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `manifest.json` and `metrics.csv` into `dir`, creating it if
/// needed.
pub fn emit_report(
    metrics: &[StageMetrics],
    config: &TrainConfig,
    class_order: &[usize],
    stage_sizes: &[usize],
    dir: &Path,
) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::Core(taba_core::Error::Empty("metrics")));
    }
    fs::create_dir_all(dir)?;
    let manifest = RunManifest {
        config: config.clone(),
        seed: config.seed,
        class_order: class_order.to_vec(),
        stage_sizes: stage_sizes.to_vec(),
        versions: Versions::default(),
        stages: metrics.iter().map(StageSummary::from).collect(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(dir.join(METRICS_FILE), metrics_csv(metrics)?)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
