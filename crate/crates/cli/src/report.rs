use anyhow::Context;
use chrono::NaiveDate;
use priceband_core::weather_volatility::{spike_histogram, spike_histogram_csv};
use serde_json::json;

use crate::artifacts::{self, load_full, require, MissingArtifact};
use crate::config::RunConfig;

fn latest_prediction(cfg: &RunConfig) -> anyhow::Result<NaiveDate> {
    let root = cfg.out_dir.join("predict");
    let entries = std::fs::read_dir(&root).map_err(|_| MissingArtifact(root.join("<date>/density.json").display().to_string()))?;
    let mut dates = Vec::new();
    for entry in entries {
        let entry = entry.with_context(|| format!("listing {}", root.display()))?;
        if let Some(date) = entry.file_name().to_str().and_then(|n| n.parse::<NaiveDate>().ok()) {
            dates.push(date);
        }
    }
    dates
        .into_iter()
        .max()
        .ok_or_else(|| MissingArtifact(root.join("<date>/density.json").display().to_string()).into())
}

/// Gathers the data behind the usual figures: when spikes happen, the
/// scenario density of one day, interval against actual prices, and the
/// coverage confidence curve.
pub fn run(cfg: &RunConfig, date: Option<NaiveDate>) -> anyhow::Result<()> {
    let eval = artifacts::evaluate_dir(cfg);
    let overlay = require(&eval.join("overlay.csv"))?;
    let curve = require(&eval.join("phi_curve.csv"))?;
    let date = match date {
        Some(d) => d,
        None => latest_prediction(cfg)?,
    };
    let density_text = require(&artifacts::predict_dir(cfg, date).join("density.json"))?;
    let density: serde_json::Value = serde_json::from_str(&density_text).context("parsing density.json")?;

    let prices = load_full(cfg)?.price_series()?;
    let histogram = spike_histogram(&prices, cfg.spike_threshold);

    let dir = artifacts::report_dir(cfg);
    let heatmap = json!({ "date": date.to_string(), "density": density });
    artifacts::write(&dir.join("spike_histogram.csv"), spike_histogram_csv(&histogram))?;
    artifacts::write(&dir.join("density_heatmap.json"), serde_json::to_string_pretty(&heatmap)?)?;
    artifacts::write(&dir.join("interval_overlay.csv"), overlay)?;
    artifacts::write(&dir.join("confidence_curve.csv"), curve)?;
    println!(
        "report written to {} ({} spikes above {} A$/MWh)",
        dir.display(),
        histogram.iter().sum::<u64>(),
        cfg.spike_threshold
    );
    Ok(())
}
