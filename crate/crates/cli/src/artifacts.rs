//! Output layout and the loading helpers shared by the commands.
//!
//! ```text
//! <out>/thresholds.json, calibration_report.json      calibrate
//! <out>/checkpoint.json, norm.json, train_log.jsonl   train
//! <out>/predict/<date>/{interval.csv,density.json,scenarios.csv,summary.json}
//! <out>/evaluate/{report.json,phi_curve.csv,overlay.csv,seasons.json}
//! <out>/report/{spike_histogram.csv,density_heatmap.json,interval_overlay.csv,confidence_curve.csv}
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use priceband_core::ctsgan::CtsganModel;
use priceband_core::data_ingest::{load_dataset, Dataset, NormParams};
use priceband_core::fsio::write_atomic;
use priceband_core::weather_volatility::VolatilityThresholds;

use crate::config::RunConfig;

/// A file an earlier command should have produced is absent.
#[derive(Debug)]
pub struct MissingArtifact(pub String);

impl fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing artifact: {}", self.0)
    }
}

impl std::error::Error for MissingArtifact {}

pub fn norm_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("norm.json")
}

pub fn train_log_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("train_log.jsonl")
}

pub fn predict_dir(cfg: &RunConfig, date: NaiveDate) -> PathBuf {
    cfg.out_dir.join("predict").join(date.to_string())
}

pub fn evaluate_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("evaluate")
}

pub fn report_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("report")
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    write_atomic(path, contents.as_ref()).with_context(|| format!("writing {}", path.display()))
}

pub fn require(path: &Path) -> anyhow::Result<String> {
    if !path.is_file() {
        return Err(MissingArtifact(path.display().to_string()).into());
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_full(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let path = cfg.dataset_path();
    let ds = load_dataset(path, &cfg.schema).with_context(|| format!("loading dataset {}", path.display()))?;
    log::info!("{}", ds.report().summary());
    Ok(ds)
}

/// Days used for training and calibration, with scaling fitted on them.
pub fn training_part(cfg: &RunConfig, full: &Dataset) -> anyhow::Result<Dataset> {
    match cfg.split_date {
        Some(date) => {
            let days = full.days().iter().filter(|d| d.date < date).cloned().collect();
            Dataset::from_days(days).with_context(|| format!("no complete days before split date {date}"))
        }
        None => Ok(full.clone()),
    }
}

pub fn load_norm(cfg: &RunConfig) -> anyhow::Result<NormParams> {
    let text = require(&norm_path(cfg))?;
    serde_json::from_str(&text).context("parsing norm.json")
}

pub fn load_model(cfg: &RunConfig) -> anyhow::Result<CtsganModel> {
    let path = cfg.checkpoint_path();
    if !path.is_file() {
        return Err(MissingArtifact(path.display().to_string()).into());
    }
    CtsganModel::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn load_thresholds(cfg: &RunConfig) -> anyhow::Result<VolatilityThresholds> {
    let path = cfg.thresholds_path();
    let text = require(&path)?;
    VolatilityThresholds::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// The dataset scaled with the parameters saved at training time, so that
/// conditions match what the model saw.
pub fn load_scaled(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let norm = load_norm(cfg)?;
    Ok(load_full(cfg)?.renormalized(norm))
}
