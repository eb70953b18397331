use anyhow::{bail, Context};
use chrono::{Datelike, NaiveDate};
use priceband_core::ctsgan::CtsganModel;
use priceband_core::data_ingest::{Dataset, Sample};
use priceband_core::intervals::{predict_pipeline, ScenarioKind, PipelineOutput};
use priceband_core::rng::derive_seed;
use priceband_core::weather_volatility::{
    day_variances, FactorLevels, SigmaIncrementTable, VolatilityThresholds, WeatherVariances,
};
use serde::Serialize;

use crate::artifacts::{self, load_model, load_scaled, load_thresholds};
use crate::config::{PredictionParams, RunConfig};

const PREDICT_STREAM: u64 = 0x5044;

/// Seed of one day's prediction within a run.
pub fn day_seed(run_seed: u64, date: NaiveDate) -> u64 {
    derive_seed(run_seed, PREDICT_STREAM, date.num_days_from_ce() as u64)
}

pub struct Predictor<'a> {
    pub model: &'a CtsganModel,
    pub dataset: &'a Dataset,
    pub thresholds: &'a VolatilityThresholds,
    pub table: SigmaIncrementTable,
    pub params: &'a PredictionParams,
    pub hdd_base: f64,
}

impl Predictor<'_> {
    pub fn sample(&self, date: NaiveDate) -> anyhow::Result<Sample> {
        self.dataset
            .sample(date, self.hdd_base)
            .with_context(|| format!("no complete data for {date} and the day before"))
    }

    pub fn predict(
        &self,
        sample: &Sample,
        seed: u64,
        variances: Option<WeatherVariances>,
    ) -> anyhow::Result<PipelineOutput> {
        let variances = match variances {
            Some(v) => v,
            None => day_variances(&sample.weather).with_context(|| format!("weather variances of {}", sample.date))?,
        };
        let out = predict_pipeline(
            self.model,
            &sample.condition.features(),
            &variances,
            self.thresholds,
            &self.table,
            &self.params.pipeline(seed),
        )
        .with_context(|| format!("predicting {}", sample.date))?;
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    date: NaiveDate,
    sigma: f64,
    reinforced: bool,
    variances: WeatherVariances,
    levels: FactorLevels,
    normal_scenarios: usize,
    volatile_scenarios: usize,
    nominal_coverage: f64,
    mean_width: f64,
}

pub fn run(cfg: &RunConfig, date: NaiveDate, variances: Option<&[f64]>) -> anyhow::Result<()> {
    let dataset = load_scaled(cfg)?;
    let model = load_model(cfg)?;
    let thresholds = load_thresholds(cfg)?;
    let predictor = Predictor {
        model: &model,
        dataset: &dataset,
        thresholds: &thresholds,
        table: SigmaIncrementTable::default(),
        params: &cfg.prediction,
        hdd_base: cfg.hdd_base,
    };
    let injected = match variances {
        Some(&[t, i, w]) => Some(WeatherVariances::new(t, i, w)),
        Some(other) => bail!("--variances needs 3 values (temperature,irradiance,wind), got {}", other.len()),
        None => None,
    };
    let sample = predictor.sample(date)?;
    let out = predictor.predict(&sample, day_seed(cfg.seed, date), injected)?;

    let dir = artifacts::predict_dir(cfg, date);
    let mut interval = Vec::new();
    out.interval.write_csv(&mut interval, &dataset.norm().price)?;
    let mut scenarios = Vec::new();
    out.scenarios.write_csv(&mut scenarios)?;
    let widths = out.interval.widths();
    let summary = Summary {
        date,
        sigma: out.sigma(),
        reinforced: out.reinforced(),
        variances: out.assessment.variances,
        levels: out.assessment.levels,
        normal_scenarios: out.scenarios.count(ScenarioKind::Normal),
        volatile_scenarios: out.scenarios.count(ScenarioKind::Volatile),
        nominal_coverage: out.interval.nominal_coverage,
        mean_width: widths.iter().sum::<f64>() / widths.len() as f64,
    };
    artifacts::write(&dir.join("interval.csv"), interval)?;
    artifacts::write(&dir.join("density.json"), out.density.to_json()?)?;
    artifacts::write(&dir.join("scenarios.csv"), scenarios)?;
    artifacts::write(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    log::info!("prediction for {date} written to {}", dir.display());
    println!("sigma={:.3} reinforced={}", out.sigma(), out.reinforced());
    Ok(())
}
