use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use chrono::NaiveDate;
use priceband_core::ctsgan::{TrainingConfig, DEFAULT_LATENT_DIM};
use priceband_core::data_ingest::{Schema, DEFAULT_HDD_BASE};
use priceband_core::intervals::{IntervalMode, PipelineConfig, DEFAULT_BINS, DEFAULT_NOMINAL};
use priceband_core::metrics::Targets;
use priceband_core::seqnet::DEFAULT_HIDDEN_DIM;
use priceband_core::weather_volatility::DEFAULT_SPIKE_THRESHOLD;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSize {
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl Default for ModelSize {
    fn default() -> Self {
        Self {
            hidden_dim: DEFAULT_HIDDEN_DIM,
            latent_dim: DEFAULT_LATENT_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionParams {
    /// Scenarios per noise level (M).
    pub scenarios: usize,
    pub nominal: f64,
    pub bins: usize,
    pub mode: IntervalMode,
    pub reinforcement: bool,
}

impl Default for PredictionParams {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            scenarios: p.scenarios,
            nominal: DEFAULT_NOMINAL,
            bins: DEFAULT_BINS,
            mode: p.mode,
            reinforcement: p.reinforcement,
        }
    }
}

impl PredictionParams {
    pub fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            scenarios: self.scenarios,
            nominal: self.nominal,
            bins: self.bins,
            mode: self.mode,
            reinforcement: self.reinforcement,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricTargets {
    pub delta_prime: f64,
    pub xi_prime: f64,
    /// Repeated runs (S).
    pub runs: usize,
}

impl Default for MetricTargets {
    fn default() -> Self {
        Self {
            delta_prime: 0.9,
            xi_prime: 0.2,
            runs: 10,
        }
    }
}

impl MetricTargets {
    pub fn targets(&self) -> Targets {
        Targets {
            delta_prime: self.delta_prime,
            xi_prime: self.xi_prime,
        }
    }
}

/// Everything a command needs. Relative paths in the file are taken relative
/// to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Schema,
    pub out_dir: PathBuf,
    /// Defaults to `checkpoint.json` in the output directory.
    pub checkpoint: Option<PathBuf>,
    /// Defaults to `thresholds.json` in the output directory.
    pub thresholds: Option<PathBuf>,
    /// Training and calibration use the days before this date. Without it
    /// they use every day.
    pub split_date: Option<NaiveDate>,
    pub hdd_base: f64,
    pub spike_threshold: f64,
    pub model: ModelSize,
    pub training: TrainingConfig,
    pub prediction: PredictionParams,
    pub metrics: MetricTargets,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            schema: Schema::default(),
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            thresholds: None,
            split_date: None,
            hdd_base: DEFAULT_HDD_BASE,
            spike_threshold: DEFAULT_SPIKE_THRESHOLD,
            model: ModelSize::default(),
            training: TrainingConfig::default(),
            prediction: PredictionParams::default(),
            metrics: MetricTargets::default(),
            seed: 0,
        }
    }
}

/// Command-line values that replace config file values when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub scenarios: Option<usize>,
    pub runs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.out_dir);
        if let Some(p) = cfg.checkpoint.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.thresholds.as_mut() {
            rebase(p);
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.out_dir {
            self.out_dir = v;
        }
        if let Some(v) = o.dataset {
            self.dataset = Some(v);
        }
        if let Some(v) = o.iterations {
            self.training.iterations_per_phase = v;
        }
        if let Some(v) = o.scenarios {
            self.prediction.scenarios = v;
        }
        if let Some(v) = o.runs {
            self.metrics.runs = v;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match &self.dataset {
            Some(p) if !p.is_file() => bail!("dataset {} does not exist", p.display()),
            Some(_) => {}
            None => bail!("no dataset given (set \"dataset\" in the config or pass --dataset)"),
        }
        ensure!(self.model.hidden_dim > 0 && self.model.latent_dim > 0, "model dimensions must be positive");
        self.training.validate()?;
        let p = &self.prediction;
        ensure!(p.scenarios > 0, "prediction.scenarios must be positive");
        ensure!(p.nominal > 0.0 && p.nominal < 1.0, "prediction.nominal must lie in (0, 1)");
        ensure!(p.bins > 0, "prediction.bins must be positive");
        ensure!(self.metrics.runs > 0, "metrics.runs must be positive");
        ensure!(
            (0.0..=1.0).contains(&self.metrics.delta_prime) && self.metrics.xi_prime >= 0.0,
            "metric targets out of range"
        );
        ensure!(self.hdd_base.is_finite(), "hdd_base must be finite");
        ensure!(self.spike_threshold.is_finite(), "spike_threshold must be finite");
        Ok(())
    }

    pub fn dataset_path(&self) -> &Path {
        self.dataset.as_deref().expect("validated config has a dataset")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("checkpoint.json"))
    }

    pub fn thresholds_path(&self) -> PathBuf {
        self.thresholds.clone().unwrap_or_else(|| self.out_dir.join("thresholds.json"))
    }
}
