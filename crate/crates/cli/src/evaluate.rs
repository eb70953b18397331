use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use anyhow::{anyhow, bail};
use chrono::{Datelike, NaiveDate};
use priceband_core::data_ingest::{denormalize, Sample};
use priceband_core::intervals::PredictionInterval;
use priceband_core::metrics::{ecpas, eawapi, repeated_sampling_harness, EvaluationRun};
use priceband_core::weather_volatility::SigmaIncrementTable;
use serde::Serialize;

use crate::artifacts::{self, load_model, load_scaled, load_thresholds};
use crate::config::RunConfig;
use crate::predict::{day_seed, Predictor};

/// Southern-hemisphere season of a date. Summer is December to February, so
/// a summer spans the turn of the year and is labelled by its first year,
/// e.g. `summer 2019-20`.
pub fn season(date: NaiveDate) -> String {
    let (name, start_year) = match date.month() {
        12 => ("summer", date.year()),
        1 | 2 => ("summer", date.year() - 1),
        3..=5 => ("autumn", date.year()),
        6..=8 => ("winter", date.year()),
        _ => ("spring", date.year()),
    };
    if name == "summer" {
        format!("summer {}-{:02}", start_year, (start_year + 1).rem_euclid(100))
    } else {
        format!("{name} {start_year}")
    }
}

#[derive(Debug, Serialize)]
struct SeasonSummary {
    season: String,
    days: usize,
    /// Mean over runs of the run's coverage on this season's days.
    ecpas: f64,
    eawapi: f64,
}

pub fn run(cfg: &RunConfig, from: NaiveDate, to: NaiveDate) -> anyhow::Result<()> {
    if from > to {
        bail!("--from {from} is after --to {to}");
    }
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
    let samples: Vec<Sample> = from
        .iter_days()
        .take_while(|d| *d <= to)
        .map(|d| {
            dataset
                .sample(d, cfg.hdd_base)
                .map_err(|e| anyhow!("missing actuals for {d}: {e}"))
        })
        .collect::<anyhow::Result<_>>()?;

    let per_day: Mutex<BTreeMap<(usize, usize), (f64, f64)>> = Mutex::new(BTreeMap::new());
    let first_run: Mutex<Vec<PredictionInterval>> = Mutex::new(Vec::new());
    let forecaster = |run_id: usize, seed: u64| -> priceband_core::Result<EvaluationRun> {
        let mut run: Option<EvaluationRun> = None;
        let mut intervals = Vec::with_capacity(samples.len());
        for (k, sample) in samples.iter().enumerate() {
            let out = predictor
                .predict(sample, day_seed(seed, sample.date), None)
                .map_err(|e| priceband_core::Error::InvalidArgument(format!("{e:#}")))?;
            let iv = out.interval;
            let day_cov = ecpas(&sample.target, &iv.lower, &iv.upper)?;
            let day_width = eawapi(&iv.lower, &iv.upper)?;
            per_day.lock().expect("metrics lock").insert((run_id, k), (day_cov, day_width));
            match run.as_mut() {
                Some(r) => r.extend(&sample.target, &iv)?,
                None => run = Some(EvaluationRun::from_interval(run_id, sample.target.clone(), &iv)?),
            }
            intervals.push(iv);
        }
        if run_id == 0 {
            *first_run.lock().expect("interval lock") = intervals;
        }
        run.ok_or(priceband_core::Error::EmptyInput)
    };
    let report = repeated_sampling_harness(&forecaster, cfg.metrics.runs, cfg.metrics.targets(), cfg.seed)?;
    let per_day = per_day.into_inner().expect("metrics lock");
    let first_run = first_run.into_inner().expect("interval lock");

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, s) in samples.iter().enumerate() {
        groups.entry(season(s.date)).or_default().push(k);
    }
    let runs = cfg.metrics.runs as f64;
    let seasons: Vec<SeasonSummary> = groups
        .into_iter()
        .map(|(season, days)| {
            let n = days.len() as f64;
            let (mut cov, mut width) = (0.0, 0.0);
            for r in 0..cfg.metrics.runs {
                for k in &days {
                    let (c, w) = per_day[&(r, *k)];
                    cov += c / n;
                    width += w / n;
                }
            }
            SeasonSummary {
                season,
                days: days.len(),
                ecpas: cov / runs,
                eawapi: width / runs,
            }
        })
        .collect();

    let price_norm = dataset.norm().price;
    let mut overlay = String::from("date,timestep,actual,lower,upper\n");
    for (sample, iv) in samples.iter().zip(&first_run) {
        let actual = denormalize(&sample.target, &price_norm);
        let lower = denormalize(&iv.lower, &price_norm);
        let upper = denormalize(&iv.upper, &price_norm);
        for t in 0..actual.len() {
            writeln!(overlay, "{},{t},{},{},{}", sample.date, actual[t], lower[t], upper[t])?;
        }
    }
    let mut curve = String::from("delta_prime,phi\n");
    for (d, phi) in report.coverage_curve() {
        writeln!(curve, "{d},{phi}")?;
    }

    let dir = artifacts::evaluate_dir(cfg);
    artifacts::write(&dir.join("report.json"), report.to_json()?)?;
    artifacts::write(&dir.join("phi_curve.csv"), curve)?;
    artifacts::write(&dir.join("overlay.csv"), overlay)?;
    artifacts::write(&dir.join("seasons.json"), serde_json::to_string_pretty(&seasons)?)?;

    println!("{:>4}  {:>8}  {:>8}", "s", "delta", "xi");
    for r in &report.runs {
        println!("{:>4}  {:>8.4}  {:>8.4}", r.s, r.ecpas, r.eawapi);
    }
    println!(
        "phi(delta'={}) = {:.3}   phi_width(xi'={}) = {:.3}",
        report.targets.delta_prime, report.phi_coverage, report.targets.xi_prime, report.phi_width
    );
    println!(
        "at 90% confidence: delta = {:.4}, xi = {:.4}",
        report.achieved_delta_90, report.achieved_xi_90
    );
    if seasons.len() > 1 {
        println!("{:<16}  {:>5}  {:>8}  {:>8}", "season", "days", "delta", "xi");
        for s in &seasons {
            println!("{:<16}  {:>5}  {:>8.4}  {:>8.4}", s.season, s.days, s.ecpas, s.eawapi);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn southern_hemisphere_seasons() {
        assert_eq!(season(d(2019, 12, 1)), "summer 2019-20");
        assert_eq!(season(d(2020, 2, 29)), "summer 2019-20");
        assert_eq!(season(d(2020, 3, 1)), "autumn 2020");
        assert_eq!(season(d(2020, 7, 15)), "winter 2020");
        assert_eq!(season(d(2020, 11, 30)), "spring 2020");
        assert_eq!(season(d(2099, 12, 31)), "summer 2099-00");
    }
}
