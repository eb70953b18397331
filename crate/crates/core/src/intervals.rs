//! Scenario sets, stacked per-timestep densities, and prediction intervals.

use std::io::Write;
use std::ops::Range;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::ctsgan::{CtsganModel, NoiseSpec};
use crate::data_ingest::{MinMaxParams, STEPS_PER_DAY};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats::quantile_sorted;
use crate::weather_volatility::{assess, Reinforcement, SigmaIncrementTable, VolatilityThresholds, WeatherVariances};

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_NOMINAL: f64 = 0.9;
/// Half-hour indices 24..=38 (12:00 to 19:00).
pub const REINFORCED_WINDOW: Range<usize> = 24..39;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Normal,
    Volatile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ScenarioKind,
    pub sigma: f64,
}

impl Provenance {
    pub fn for_sigma(sigma: f64) -> Self {
        let kind = if sigma > 1.0 {
            ScenarioKind::Volatile
        } else {
            ScenarioKind::Normal
        };
        Self { kind, sigma }
    }
}

/// Stable identifier for a condition vector (FNV-1a over the f64 bit patterns).
pub fn condition_id(features: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in features {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// `M × 48` normalized price paths with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Array2<f64>,
    provenance: Vec<Provenance>,
    condition_id: String,
    reinforced_window: Option<Range<usize>>,
}

impl ScenarioSet {
    pub fn new(scenarios: Array2<f64>, provenance: Vec<Provenance>, condition_id: impl Into<String>) -> Result<Self> {
        if scenarios.ncols() != STEPS_PER_DAY {
            return Err(Error::shape(format!("{STEPS_PER_DAY} columns"), scenarios.ncols()));
        }
        if provenance.len() != scenarios.nrows() {
            return Err(Error::LengthMismatch {
                left: scenarios.nrows(),
                right: provenance.len(),
            });
        }
        if scenarios.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("scenario values must lie in [0, 1]".into()));
        }
        Ok(Self {
            scenarios,
            provenance,
            condition_id: condition_id.into(),
            reinforced_window: None,
        })
    }

    pub fn empty(condition_id: impl Into<String>) -> Self {
        Self {
            scenarios: Array2::zeros((0, STEPS_PER_DAY)),
            provenance: Vec::new(),
            condition_id: condition_id.into(),
            reinforced_window: None,
        }
    }

    pub fn scenarios(&self) -> &Array2<f64> {
        &self.scenarios
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn condition_id(&self) -> &str {
        &self.condition_id
    }

    pub fn reinforced_window(&self) -> Option<Range<usize>> {
        self.reinforced_window.clone()
    }

    pub fn len(&self) -> usize {
        self.scenarios.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest noise σ among members (1 for an empty or all-normal set).
    pub fn noise_sigma(&self) -> f64 {
        self.provenance.iter().map(|p| p.sigma).fold(1.0, f64::max)
    }

    pub fn count(&self, kind: ScenarioKind) -> usize {
        self.provenance.iter().filter(|p| p.kind == kind).count()
    }

    /// Rows of the given kind only.
    pub fn subset(&self, kind: ScenarioKind) -> ScenarioSet {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| self.provenance[i].kind == kind).collect();
        ScenarioSet {
            scenarios: self.scenarios.select(Axis(0), &rows),
            provenance: rows.iter().map(|&i| self.provenance[i]).collect(),
            condition_id: self.condition_id.clone(),
            reinforced_window: None,
        }
    }

    /// CSV with header `scenario,kind,sigma,t00..t47`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["scenario".to_string(), "kind".into(), "sigma".into()];
        header.extend((0..STEPS_PER_DAY).map(|t| format!("t{t:02}")));
        w.write_record(&header)?;
        for (i, (row, p)) in self.scenarios.rows().into_iter().zip(&self.provenance).enumerate() {
            let kind = match p.kind {
                ScenarioKind::Normal => "normal",
                ScenarioKind::Volatile => "volatile",
            };
            let mut rec = vec![i.to_string(), kind.to_string(), p.sigma.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("scenario csv", e))?;
        Ok(())
    }
}

/// Per-timestep histogram over equal-width bins on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub bin_edges: Vec<f64>,
    /// `48 × B`, each row a probability mass function.
    pub mass: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Mass of every bin that intersects `[lo, hi]` at timestep `t`.
    pub fn mass_within(&self, t: usize, lo: f64, hi: f64) -> f64 {
        self.mass[t]
            .iter()
            .enumerate()
            .filter(|(b, _)| self.bin_edges[*b] <= hi && self.bin_edges[b + 1] >= lo)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn bin_index(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor() as usize).min(bins - 1)
}

pub fn stack_density(set: &ScenarioSet, bins: usize) -> Result<DensityGrid> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    let m = set.len() as f64;
    let bin_edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    let mass = set
        .scenarios
        .columns()
        .into_iter()
        .map(|col| {
            let mut counts = vec![0usize; bins];
            for &v in col {
                counts[bin_index(v, bins)] += 1;
            }
            counts.into_iter().map(|c| c as f64 / m).collect()
        })
        .collect();
    Ok(DensityGrid { bin_edges, mass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// Symmetric empirical quantiles.
    #[default]
    Quantile,
    /// Pointwise min and max over all scenarios.
    Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nominal_coverage: f64,
}

impl PredictionInterval {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nominal_coverage: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.partial_cmp(u).is_none_or(|o| o.is_gt())) {
            return Err(Error::InvalidArgument("interval lower bound exceeds upper bound".into()));
        }
        Ok(Self {
            lower,
            upper,
            nominal_coverage,
        })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Restrict to a range of timesteps.
    pub fn window(&self, range: Range<usize>) -> PredictionInterval {
        PredictionInterval {
            lower: self.lower[range.clone()].to_vec(),
            upper: self.upper[range].to_vec(),
            nominal_coverage: self.nominal_coverage,
        }
    }

    /// `timestep,lower,upper,lower_denorm_A$,upper_denorm_A$`
    pub fn write_csv<W: Write>(&self, writer: W, price_norm: &MinMaxParams) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestep", "lower", "upper", "lower_denorm_A$", "upper_denorm_A$"])?;
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                self.lower[t].to_string(),
                self.upper[t].to_string(),
                price_norm.denormalize(self.lower[t]).to_string(),
                price_norm.denormalize(self.upper[t]).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("interval csv", e))?;
        Ok(())
    }
}

/// Smallest scenario count for which the two tail quantiles at `nominal`
/// are separated by at least one order statistic.
pub fn min_scenarios(nominal: f64) -> usize {
    (2.0 / (1.0 - nominal) - 1e-9).ceil() as usize
}

pub fn build_interval(set: &ScenarioSet, nominal: f64) -> Result<PredictionInterval> {
    build_interval_with(set, nominal, IntervalMode::Quantile)
}

pub fn build_interval_with(set: &ScenarioSet, nominal: f64, mode: IntervalMode) -> Result<PredictionInterval> {
    if !(nominal > 0.0 && nominal < 1.0) {
        return Err(Error::InvalidArgument(format!("nominal coverage must be in (0, 1), got {nominal}")));
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let needed = min_scenarios(nominal);
    if mode == IntervalMode::Quantile && set.len() < needed {
        return Err(Error::TooFewScenarios {
            needed,
            got: set.len(),
            nominal,
        });
    }
    let alpha = (1.0 - nominal) / 2.0;
    let mut lower = Vec::with_capacity(STEPS_PER_DAY);
    let mut upper = Vec::with_capacity(STEPS_PER_DAY);
    for col in set.scenarios.columns() {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        match mode {
            IntervalMode::Quantile => {
                lower.push(quantile_sorted(&sorted, alpha));
                upper.push(quantile_sorted(&sorted, 1.0 - alpha));
            }
            IntervalMode::Envelope => {
                lower.push(sorted[0]);
                upper.push(sorted[sorted.len() - 1]);
            }
        }
    }
    PredictionInterval::new(lower, upper, nominal)
}

/// Union of a normal and a volatile set, retaining provenance.
pub fn combine_normal_volatile(normal: &ScenarioSet, volatile: &ScenarioSet, afternoon_window: Range<usize>) -> Result<ScenarioSet> {
    if normal.condition_id != volatile.condition_id {
        return Err(Error::ConditionMismatch {
            left: normal.condition_id.clone(),
            right: volatile.condition_id.clone(),
        });
    }
    if afternoon_window.is_empty() || afternoon_window.end > STEPS_PER_DAY {
        return Err(Error::InvalidArgument(format!("window {afternoon_window:?} outside 0..{STEPS_PER_DAY}")));
    }
    if volatile.is_empty() {
        return Ok(normal.clone());
    }
    let scenarios = concatenate(Axis(0), &[normal.scenarios.view(), volatile.scenarios.view()]).expect("equal widths");
    let mut provenance = normal.provenance.clone();
    provenance.extend_from_slice(&volatile.provenance);
    Ok(ScenarioSet {
        scenarios,
        provenance,
        condition_id: normal.condition_id.clone(),
        reinforced_window: Some(afternoon_window),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Scenarios per noise level.
    pub scenarios: usize,
    pub nominal: f64,
    pub bins: usize,
    pub mode: IntervalMode,
    /// Disable to always use σ = 1 only.
    pub reinforcement: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scenarios: 500,
            nominal: DEFAULT_NOMINAL,
            bins: DEFAULT_BINS,
            mode: IntervalMode::Quantile,
            reinforcement: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub interval: PredictionInterval,
    pub density: DensityGrid,
    pub scenarios: ScenarioSet,
    pub assessment: Reinforcement,
}

impl PipelineOutput {
    pub fn sigma(&self) -> f64 {
        self.assessment.sigma
    }

    pub fn reinforced(&self) -> bool {
        self.assessment.reinforced
    }
}

const NORMAL_STREAM: u64 = 0x4e4f;
const VOLATILE_STREAM: u64 = 0x564f;

/// Assess the forecast weather, generate normal (and if warranted volatile)
/// scenarios, and reduce them to an interval and a density.
pub fn predict_pipeline(
    model: &CtsganModel,
    condition: &[f64],
    variances: &WeatherVariances,
    thresholds: &VolatilityThresholds,
    table: &SigmaIncrementTable,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let assessment = assess(*variances, thresholds, table);
    let noise_dim = model.dims().noise_dim;
    let normal = model.generate_scenarios(
        condition,
        &NoiseSpec::new(1.0, noise_dim)?,
        config.scenarios,
        derive_seed(config.seed, NORMAL_STREAM, 0),
    )?;
    let scenarios = if config.reinforcement && assessment.reinforced {
        let volatile = model.generate_scenarios(
            condition,
            &NoiseSpec::new(assessment.sigma, noise_dim)?,
            config.scenarios,
            derive_seed(config.seed, VOLATILE_STREAM, 0),
        )?;
        combine_normal_volatile(&normal, &volatile, REINFORCED_WINDOW)?
    } else {
        normal
    };
    let assessment = if config.reinforcement {
        assessment
    } else {
        Reinforcement {
            sigma: 1.0,
            reinforced: false,
            ..assessment
        }
    };
    let interval = build_interval_with(&scenarios, config.nominal, config.mode)?;
    let density = stack_density(&scenarios, config.bins)?;
    Ok(PipelineOutput {
        interval,
        density,
        scenarios,
        assessment,
    })
}
