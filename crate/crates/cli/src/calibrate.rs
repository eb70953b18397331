use anyhow::Context;
use priceband_core::data_ingest::NormalizedWeather;
use priceband_core::weather_volatility::{
    calibrate_thresholds, day_variances, PerFactor, WeatherFactor, LEVEL_PERCENTILES,
};
use serde::Serialize;

use crate::artifacts::{self, load_full, training_part};
use crate::config::RunConfig;

#[derive(Debug, Serialize)]
struct FactorReport {
    factor: String,
    samples: usize,
    percentiles: [f64; 3],
    cuts: [f64; 3],
    max_variance: f64,
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    first_day: String,
    last_day: String,
    days: usize,
    factors: Vec<FactorReport>,
}

/// Thresholds are the 60th/85th/95th percentiles of afternoon variances of
/// the normalized weather over the training days.
pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let full = load_full(cfg)?;
    let train = training_part(cfg, &full)?;
    let norm = *train.norm();
    let mut history = (Vec::new(), Vec::new(), Vec::new());
    for day in train.days() {
        let weather = NormalizedWeather::from_forecast(&day.weather_forecast(), &norm)
            .with_context(|| format!("weather of {}", day.date))?;
        let v = day_variances(&weather).with_context(|| format!("variances of {}", day.date))?;
        history.0.push(v.temperature);
        history.1.push(v.irradiance);
        history.2.push(v.wind);
    }
    let series = PerFactor::new(&history.0[..], &history.1[..], &history.2[..]);
    let thresholds = calibrate_thresholds(&series).context("calibrating thresholds")?;

    let factors = [WeatherFactor::Temperature, WeatherFactor::Irradiance, WeatherFactor::Wind]
        .into_iter()
        .map(|f| {
            let t = thresholds.get(f);
            let samples = series.get(f);
            FactorReport {
                factor: f.to_string(),
                samples: samples.len(),
                percentiles: LEVEL_PERCENTILES,
                cuts: [t.low_cut, t.med_cut, t.high_cut],
                max_variance: samples.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();
    let days = train.days();
    let report = CalibrationReport {
        first_day: days.first().map(|d| d.date.to_string()).unwrap_or_default(),
        last_day: days.last().map(|d| d.date.to_string()).unwrap_or_default(),
        days: days.len(),
        factors,
    };

    let path = cfg.thresholds_path();
    artifacts::write(&path, thresholds.to_json()?)?;
    artifacts::write(&artifacts::norm_path(cfg), serde_json::to_string_pretty(&norm)?)?;
    artifacts::write(
        &cfg.out_dir.join("calibration_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    for f in &report.factors {
        println!(
            "{:<12} n={:<5} cuts {:.5} / {:.5} / {:.5}",
            f.factor, f.samples, f.cuts[0], f.cuts[1], f.cuts[2]
        );
    }
    println!("thresholds written to {}", path.display());
    Ok(())
}
