//! Reliability (ECPAS) and sharpness (EAWAPI) of prediction intervals, and
//! their confidence levels over repeated sampling.
//!
//! Coverage is boundary-inclusive. The coverage confidence level counts runs
//! with `δ^s ≥ δ'` while the width confidence level counts runs with
//! `ξ^s < ξ'` (strict), so the two are deliberately asymmetric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::PredictionInterval;
use crate::rng::derive_seed;

/// Actuals paired with the interval that was forecast for them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRun {
    pub run_id: usize,
    pub actuals: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl EvaluationRun {
    pub fn new(run_id: usize, actuals: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if actuals.len() != lower.len() {
            return Err(Error::LengthMismatch {
                left: actuals.len(),
                right: lower.len(),
            });
        }
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if actuals.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            run_id,
            actuals,
            lower,
            upper,
        })
    }

    pub fn from_interval(run_id: usize, actuals: Vec<f64>, interval: &PredictionInterval) -> Result<Self> {
        Self::new(run_id, actuals, interval.lower.clone(), interval.upper.clone())
    }

    /// Append another block of samples (e.g. the next day).
    pub fn extend(&mut self, actuals: &[f64], interval: &PredictionInterval) -> Result<()> {
        if actuals.len() != interval.len() {
            return Err(Error::LengthMismatch {
                left: actuals.len(),
                right: interval.len(),
            });
        }
        self.actuals.extend_from_slice(actuals);
        self.lower.extend_from_slice(&interval.lower);
        self.upper.extend_from_slice(&interval.upper);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actuals.is_empty()
    }
}

/// Share of samples with `L_t ≤ θ_t ≤ U_t`.
pub fn ecpas(actuals: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    if actuals.len() != lower.len() || lower.len() != upper.len() {
        return Err(Error::LengthMismatch {
            left: actuals.len(),
            right: lower.len().min(upper.len()),
        });
    }
    if actuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let covered = actuals
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(a, (l, u))| *l <= *a && *a <= *u)
        .count();
    Ok(covered as f64 / actuals.len() as f64)
}

/// Mean interval width.
pub fn eawapi(lower: &[f64], upper: &[f64]) -> Result<f64> {
    if lower.len() != upper.len() {
        return Err(Error::LengthMismatch {
            left: lower.len(),
            right: upper.len(),
        });
    }
    if lower.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(lower.iter().zip(upper).map(|(l, u)| u - l).sum::<f64>() / lower.len() as f64)
}

pub fn run_ecpas(run: &EvaluationRun) -> Result<f64> {
    ecpas(&run.actuals, &run.lower, &run.upper)
}

pub fn run_eawapi(run: &EvaluationRun) -> Result<f64> {
    eawapi(&run.lower, &run.upper)
}

/// Fraction of runs with `δ^s ≥ δ'`.
pub fn confidence_level_ecpas(deltas: &[f64], delta_prime: f64) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::EmptyRuns);
    }
    Ok(deltas.iter().filter(|d| **d >= delta_prime).count() as f64 / deltas.len() as f64)
}

/// Fraction of runs with `ξ^s < ξ'`.
pub fn confidence_level_eawapi(xis: &[f64], xi_prime: f64) -> Result<f64> {
    if xis.is_empty() {
        return Err(Error::EmptyRuns);
    }
    Ok(xis.iter().filter(|x| **x < xi_prime).count() as f64 / xis.len() as f64)
}

/// Runs that must meet the target for a 90% confidence level: `⌈0.9·S⌉`.
fn ninety_percent_count(s: usize) -> usize {
    (9 * s).div_ceil(10)
}

/// Largest δ' whose coverage confidence level is at least 0.9.
pub fn achieved_delta_90(deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::EmptyRuns);
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[sorted.len() - ninety_percent_count(sorted.len())])
}

/// Smallest observed width `ξ` such that at least 90% of runs are no wider.
///
/// The width confidence level uses a strict inequality, so any `ξ'`
/// slightly above this value reaches a 90% level.
pub fn achieved_xi_90(xis: &[f64]) -> Result<f64> {
    if xis.is_empty() {
        return Err(Error::EmptyRuns);
    }
    let mut sorted = xis.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[ninety_percent_count(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub s: usize,
    pub ecpas: f64,
    pub eawapi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub delta_prime: f64,
    pub xi_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedSamplingReport {
    pub runs: Vec<RunMetrics>,
    pub targets: Targets,
    pub phi_coverage: f64,
    pub phi_width: f64,
    pub achieved_delta_90: f64,
    pub achieved_xi_90: f64,
}

impl RepeatedSamplingReport {
    pub fn from_runs(runs: Vec<RunMetrics>, targets: Targets) -> Result<Self> {
        let deltas: Vec<f64> = runs.iter().map(|r| r.ecpas).collect();
        let xis: Vec<f64> = runs.iter().map(|r| r.eawapi).collect();
        Ok(Self {
            phi_coverage: confidence_level_ecpas(&deltas, targets.delta_prime)?,
            phi_width: confidence_level_eawapi(&xis, targets.xi_prime)?,
            achieved_delta_90: achieved_delta_90(&deltas)?,
            achieved_xi_90: achieved_xi_90(&xis)?,
            runs,
            targets,
        })
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.ecpas).collect()
    }

    pub fn xis(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.eawapi).collect()
    }

    /// `(δ', ϕ(δ'))` at every distinct observed δ plus the endpoints 0 and 1.
    pub fn coverage_curve(&self) -> Vec<(f64, f64)> {
        let deltas = self.deltas();
        let mut grid = deltas.clone();
        grid.push(0.0);
        grid.push(1.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid.into_iter()
            .map(|d| (d, confidence_level_ecpas(&deltas, d).unwrap_or(0.0)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Anything that can produce intervals for a fixed evaluation set from a
/// seed. One call is one repeated-sampling run.
pub trait IntervalForecaster: Sync {
    fn run(&self, run_id: usize, seed: u64) -> Result<EvaluationRun>;
}

impl<F> IntervalForecaster for F
where
    F: Fn(usize, u64) -> Result<EvaluationRun> + Sync,
{
    fn run(&self, run_id: usize, seed: u64) -> Result<EvaluationRun> {
        self(run_id, seed)
    }
}

const HARNESS_STREAM: u64 = 0x5253;

/// Per-run seed used by [`repeated_sampling_harness`].
pub fn run_seed(master_seed: u64, run_id: usize) -> u64 {
    derive_seed(master_seed, HARNESS_STREAM, run_id as u64)
}

/// Runs the forecaster `runs` times on independent seed streams, in
/// parallel, and summarizes the results in run order.
pub fn repeated_sampling_harness(
    forecaster: &dyn IntervalForecaster,
    runs: usize,
    targets: Targets,
    master_seed: u64,
) -> Result<RepeatedSamplingReport> {
    if runs == 0 {
        return Err(Error::EmptyRuns);
    }
    let results = (0..runs)
        .into_par_iter()
        .map(|s| {
            let run = forecaster.run(s, run_seed(master_seed, s))?;
            Ok(RunMetrics {
                s: s + 1,
                ecpas: run_ecpas(&run)?,
                eawapi: run_eawapi(&run)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RepeatedSamplingReport::from_runs(results, targets)
}
