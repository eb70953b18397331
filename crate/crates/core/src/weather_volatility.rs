//! Weather-factor volatility over the spike-prone afternoon window, its
//! percentile-banded classification, and the mapping from volatility levels
//! to the standard deviation of the generator's input noise.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data_ingest::{half_hour_index, NormalizedWeather, PriceSeries, STEPS_PER_DAY};
use crate::error::{Error, Result};
use crate::stats;

/// 12:00 through 19:00 inclusive.
pub const AFTERNOON_WINDOW: Range<usize> = 24..39;
/// 12:00 through 17:00 inclusive; irradiance is low after 17:00.
pub const IRRADIANCE_WINDOW: Range<usize> = 24..35;

/// Extreme-spike threshold, A$/MWh.
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 350.0;

/// Minimum history per factor for threshold calibration.
pub const MIN_CALIBRATION_SAMPLES: usize = 100;

/// Percentile cuts separating Normal/Low/Medium/High.
pub const LEVEL_PERCENTILES: [f64; 3] = [0.60, 0.85, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherFactor {
    Temperature,
    Irradiance,
    Wind,
}

impl WeatherFactor {
    pub const ALL: [WeatherFactor; 3] = [
        WeatherFactor::Temperature,
        WeatherFactor::Irradiance,
        WeatherFactor::Wind,
    ];

    pub fn window(self) -> Range<usize> {
        match self {
            WeatherFactor::Irradiance => IRRADIANCE_WINDOW,
            _ => AFTERNOON_WINDOW,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for WeatherFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeatherFactor::Temperature => "temperature",
            WeatherFactor::Irradiance => "irradiance",
            WeatherFactor::Wind => "wind",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityLevel {
    Normal,
    Low,
    Medium,
    High,
}

impl VolatilityLevel {
    fn index(self) -> usize {
        self as usize
    }
}

/// One value per weather factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerFactor<T> {
    pub temperature: T,
    pub irradiance: T,
    pub wind: T,
}

impl<T: Copy> PerFactor<T> {
    pub fn new(temperature: T, irradiance: T, wind: T) -> Self {
        Self {
            temperature,
            irradiance,
            wind,
        }
    }

    pub fn get(&self, factor: WeatherFactor) -> T {
        match factor {
            WeatherFactor::Temperature => self.temperature,
            WeatherFactor::Irradiance => self.irradiance,
            WeatherFactor::Wind => self.wind,
        }
    }

    pub fn try_map<U: Copy>(&self, mut f: impl FnMut(WeatherFactor, T) -> Result<U>) -> Result<PerFactor<U>> {
        Ok(PerFactor {
            temperature: f(WeatherFactor::Temperature, self.temperature)?,
            irradiance: f(WeatherFactor::Irradiance, self.irradiance)?,
            wind: f(WeatherFactor::Wind, self.wind)?,
        })
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(WeatherFactor, T) -> U) -> PerFactor<U> {
        PerFactor {
            temperature: f(WeatherFactor::Temperature, self.temperature),
            irradiance: f(WeatherFactor::Irradiance, self.irradiance),
            wind: f(WeatherFactor::Wind, self.wind),
        }
    }
}

/// Afternoon-window variances of normalized weather, one per factor.
pub type WeatherVariances = PerFactor<f64>;
pub type FactorLevels = PerFactor<VolatilityLevel>;

/// Variance cut points for one factor, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorThresholds {
    pub low_cut: f64,
    pub med_cut: f64,
    pub high_cut: f64,
}

impl FactorThresholds {
    pub fn new(low_cut: f64, med_cut: f64, high_cut: f64) -> Result<Self> {
        if !(low_cut > 0.0 && low_cut < med_cut && med_cut < high_cut && high_cut.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "thresholds must satisfy 0 < low < med < high, got {low_cut} / {med_cut} / {high_cut}"
            )));
        }
        Ok(Self {
            low_cut,
            med_cut,
            high_cut,
        })
    }

    /// Lower-inclusive, upper-exclusive bands.
    pub fn classify(&self, variance: f64) -> VolatilityLevel {
        if variance < self.low_cut {
            VolatilityLevel::Normal
        } else if variance < self.med_cut {
            VolatilityLevel::Low
        } else if variance < self.high_cut {
            VolatilityLevel::Medium
        } else {
            VolatilityLevel::High
        }
    }
}

/// Serialized as `{"temperature": {...}, "irradiance": {...}, "wind": {...}}`.
pub type VolatilityThresholds = PerFactor<FactorThresholds>;

impl VolatilityThresholds {
    /// Thresholds derived from 2016-2020 NEM afternoon weather variances.
    pub fn reference() -> Self {
        PerFactor::new(
            FactorThresholds::new(0.0019, 0.0030, 0.0058).unwrap(),
            FactorThresholds::new(0.0246, 0.0419, 0.0622).unwrap(),
            FactorThresholds::new(0.0052, 0.0079, 0.0173).unwrap(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PerFactor<FactorThresholds> = serde_json::from_str(text)?;
        raw.try_map(|_, t| FactorThresholds::new(t.low_cut, t.med_cut, t.high_cut))
    }
}

/// Noise-σ increment per factor and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaIncrementTable {
    /// Rows: temperature, irradiance, wind. Columns: Normal..High.
    pub increments: [[f64; 4]; 3],
}

impl Default for SigmaIncrementTable {
    fn default() -> Self {
        let row = [0.0, 0.333, 0.667, 1.0];
        Self {
            increments: [row; 3],
        }
    }
}

impl SigmaIncrementTable {
    pub fn new(increments: [[f64; 4]; 3]) -> Result<Self> {
        for row in &increments {
            if row[0] != 0.0 || row.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidArgument(
                    "increments must start at 0 and be non-decreasing in level".into(),
                ));
            }
        }
        Ok(Self { increments })
    }

    pub fn increment(&self, factor: WeatherFactor, level: VolatilityLevel) -> f64 {
        self.increments[factor.index()][level.index()]
    }
}

/// Population variance of `day_values[window]`.
pub fn window_variance(day_values: &[f64], window: Range<usize>) -> Result<f64> {
    let incomplete = Error::IncompleteWindow {
        start: window.start,
        end: window.end,
        available: day_values.len(),
    };
    if window.is_empty() || window.end > day_values.len() {
        return Err(incomplete);
    }
    let samples = &day_values[window];
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(incomplete);
    }
    Ok(stats::population_variance(samples))
}

/// Afternoon variances of one day's normalized weather.
pub fn day_variances(weather: &NormalizedWeather) -> Result<WeatherVariances> {
    Ok(PerFactor::new(
        window_variance(&weather.temperature, WeatherFactor::Temperature.window())?,
        window_variance(&weather.irradiance, WeatherFactor::Irradiance.window())?,
        window_variance(&weather.wind, WeatherFactor::Wind.window())?,
    ))
}

pub fn classify_volatility(
    factor: WeatherFactor,
    variance: f64,
    thresholds: &VolatilityThresholds,
) -> VolatilityLevel {
    thresholds.get(factor).classify(variance)
}

pub fn classify_all(variances: &WeatherVariances, thresholds: &VolatilityThresholds) -> FactorLevels {
    variances.map(|f, v| classify_volatility(f, v, thresholds))
}

/// `max(1, sum of increments)`; the floor keeps calm days on the standard
/// normal noise.
pub fn sigma_from_levels(levels: &FactorLevels, table: &SigmaIncrementTable) -> f64 {
    let total: f64 = WeatherFactor::ALL
        .iter()
        .map(|&f| table.increment(f, levels.get(f)))
        .sum();
    total.max(1.0)
}

/// Outcome of the volatility assessment for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reinforcement {
    pub variances: WeatherVariances,
    pub levels: FactorLevels,
    pub sigma: f64,
    pub reinforced: bool,
}

/// Tolerance for deciding that σ is above the baseline of 1.
const SIGMA_EPS: f64 = 1e-9;

pub fn assess(
    variances: WeatherVariances,
    thresholds: &VolatilityThresholds,
    table: &SigmaIncrementTable,
) -> Reinforcement {
    let levels = classify_all(&variances, thresholds);
    let sigma = sigma_from_levels(&levels, table);
    let reinforced = sigma > 1.0 + SIGMA_EPS;
    Reinforcement {
        variances,
        levels,
        sigma: if reinforced { sigma } else { 1.0 },
        reinforced,
    }
}

/// Empirical 60th/85th/95th percentiles of one factor's variance history.
pub fn calibrate_factor(factor: WeatherFactor, samples: &[f64]) -> Result<FactorThresholds> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{factor} variances must be finite and non-negative"
        )));
    }
    let cuts = stats::quantiles(samples, &LEVEL_PERCENTILES);
    FactorThresholds::new(cuts[0], cuts[1], cuts[2]).map_err(|_| Error::CalibrationDegenerate {
        factor: factor.to_string(),
        low: cuts[0],
        med: cuts[1],
        high: cuts[2],
    })
}

pub fn calibrate_thresholds(history: &PerFactor<&[f64]>) -> Result<VolatilityThresholds> {
    history.try_map(calibrate_factor)
}

/// Pearson coefficient with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
}

/// Sample Pearson correlation; the p-value uses the t statistic
/// `r * sqrt((n - 2) / (1 - r^2))` with `n - 2` degrees of freedom.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let dof = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(Correlation { r, p_value })
}

/// Count of prices at or above `threshold` per half-hour-of-day.
pub fn spike_histogram(prices: &PriceSeries, threshold: f64) -> [u64; STEPS_PER_DAY] {
    let mut bins = [0u64; STEPS_PER_DAY];
    for (ts, &p) in prices.timestamps().iter().zip(prices.values()) {
        if p >= threshold {
            bins[half_hour_index(ts)] += 1;
        }
    }
    bins
}

/// `half_hour_index,count` rows with header.
pub fn spike_histogram_csv(bins: &[u64; STEPS_PER_DAY]) -> String {
    let mut out = String::from("half_hour_index,count\n");
    for (k, c) in bins.iter().enumerate() {
        out.push_str(&format!("{k},{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{FixedOffset, TimeZone};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn variance_examples() {
        assert_eq!(window_variance(&[0.3; 48], AFTERNOON_WINDOW).unwrap(), 0.0);
        let alternating: Vec<f64> = (0..48).map(|k| (k % 2) as f64).collect();
        assert_eq!(window_variance(&alternating, 24..38).unwrap(), 0.25);
        assert!(matches!(
            window_variance(&[0.1; 30], AFTERNOON_WINDOW),
            Err(Error::IncompleteWindow { .. })
        ));
        let mut gap = vec![0.1; 48];
        gap[30] = f64::NAN;
        assert!(window_variance(&gap, AFTERNOON_WINDOW).is_err());
    }

    #[test]
    fn variance_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let day: Vec<f64> = (0..48).map(|_| rng.random::<f64>()).collect();
        let window = 24..38;
        let xs = &day[window.clone()];
        // E[x^2] - E[x]^2 accumulated independently
        let n = xs.len() as f64;
        let s1: f64 = xs.iter().sum();
        let s2: f64 = xs.iter().map(|x| x * x).sum();
        let oracle = s2 / n - (s1 / n) * (s1 / n);
        assert!((window_variance(&day, window).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn classification_examples() {
        let t = VolatilityThresholds::reference();
        use VolatilityLevel::*;
        assert_eq!(classify_volatility(WeatherFactor::Temperature, 0.001, &t), Normal);
        assert_eq!(classify_volatility(WeatherFactor::Temperature, 0.004, &t), Medium);
        assert_eq!(classify_volatility(WeatherFactor::Irradiance, 0.07, &t), High);
        assert_eq!(classify_volatility(WeatherFactor::Wind, 0.02, &t), High);
        // lower-inclusive boundary
        assert_eq!(classify_volatility(WeatherFactor::Temperature, 0.0019, &t), Low);
        assert_eq!(classify_volatility(WeatherFactor::Temperature, 0.0058, &t), High);
    }

    #[test]
    fn sigma_examples() {
        use VolatilityLevel::*;
        let table = SigmaIncrementTable::default();
        let worked = sigma_from_levels(&PerFactor::new(Medium, High, High), &table);
        assert!((worked - 2.667).abs() < 1e-9);
        assert_eq!(sigma_from_levels(&PerFactor::new(Normal, Normal, Normal), &table), 1.0);
        assert_eq!(sigma_from_levels(&PerFactor::new(High, High, High), &table), 3.0);
    }

    #[test]
    fn assess_worked_example() {
        let r = assess(
            PerFactor::new(0.004, 0.07, 0.02),
            &VolatilityThresholds::reference(),
            &SigmaIncrementTable::default(),
        );
        assert!(r.reinforced);
        assert!((r.sigma - 2.667).abs() < 1e-9);

        // Low + Medium sums to exactly the baseline: no reinforcement
        let r = assess(
            PerFactor::new(0.0020, 0.045, 0.0),
            &VolatilityThresholds::reference(),
            &SigmaIncrementTable::default(),
        );
        assert!(!r.reinforced);
        assert_eq!(r.sigma, 1.0);
    }

    #[test]
    fn increment_table_validation() {
        assert!(SigmaIncrementTable::new([[0.1, 0.2, 0.3, 0.4]; 3]).is_err());
        assert!(SigmaIncrementTable::new([[0.0, 0.5, 0.4, 1.0]; 3]).is_err());
    }

    #[test]
    fn calibration_on_uniform_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let t = calibrate_factor(WeatherFactor::Wind, &xs).unwrap();
        assert!((t.low_cut - 0.60).abs() < 0.02);
        assert!((t.med_cut - 0.85).abs() < 0.02);
        assert!((t.high_cut - 0.95).abs() < 0.02);
        let normal = xs.iter().filter(|&&v| t.classify(v) == VolatilityLevel::Normal).count();
        assert!((normal as f64 / xs.len() as f64 - 0.60).abs() <= 1.0 / xs.len() as f64);
    }

    #[test]
    fn calibration_recovers_reference_temperature_row() {
        // piecewise-uniform draws with 60/25/10/5 % of mass in each band
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bands = [(0.0, 0.0019, 0.60), (0.0019, 0.0030, 0.25), (0.0030, 0.0058, 0.10), (0.0058, 0.012, 0.05)];
        let mut xs = Vec::new();
        for (lo, hi, share) in bands {
            let n = (share * 20_000.0) as usize;
            xs.extend((0..n).map(|_| rng.random_range(lo..hi)));
        }
        let t = calibrate_factor(WeatherFactor::Temperature, &xs).unwrap();
        assert!((t.low_cut - 0.0019).abs() < 5e-5, "{t:?}");
        assert!((t.med_cut - 0.0030).abs() < 5e-5, "{t:?}");
        assert!((t.high_cut - 0.0058).abs() < 1e-4, "{t:?}");
    }

    #[test]
    fn calibration_errors() {
        assert!(matches!(
            calibrate_factor(WeatherFactor::Wind, &[0.5; 150]),
            Err(Error::CalibrationDegenerate { .. })
        ));
        assert!(matches!(
            calibrate_factor(WeatherFactor::Wind, &[0.5; 99]),
            Err(Error::InsufficientData { needed: 100, got: 99 })
        ));
    }

    #[test]
    fn thresholds_json_shape() {
        let json = VolatilityThresholds::reference().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for f in ["temperature", "irradiance", "wind"] {
            for c in ["low_cut", "med_cut", "high_cut"] {
                assert!(v[f][c].is_f64(), "{f}.{c}");
            }
        }
        assert_eq!(VolatilityThresholds::from_json(&json).unwrap(), VolatilityThresholds::reference());
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = pearson_correlation(&x, &y).unwrap();
        assert!((c.r - 1.0).abs() < 1e-15);
        assert_eq!(c.p_value, 0.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&x, &neg).unwrap().r + 1.0).abs() < 1e-15);
        assert!(matches!(pearson_correlation(&x, &[1.0; 10]), Err(Error::ZeroVariance)));
        assert!(matches!(pearson_correlation(&x, &x[..5]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn pearson_matches_covariance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.5 * rng.random::<f64>()).collect();
        let n = 50.0;
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let cov = (x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - sum(&x) * sum(&y) / n) / (n - 1.0);
        let sd = |v: &[f64]| ((v.iter().map(|a| a * a).sum::<f64>() - sum(v) * sum(v) / n) / (n - 1.0)).sqrt();
        let oracle = cov / (sd(&x) * sd(&y));
        let c = pearson_correlation(&x, &y).unwrap();
        assert!((c.r - oracle).abs() < 1e-10);
        assert!(c.p_value < 1e-4);
    }

    #[test]
    fn pearson_p_value_matches_quadrature() {
        // Two-sided tail of Student's t integrated with Simpson's rule.
        let r: f64 = 0.45;
        let n = 12usize;
        let dof = (n - 2) as f64;
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let density = |x: f64| (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
        let simpson = |a: f64, b: f64, m: usize| {
            let h = (b - a) / m as f64;
            let mut s = density(a) + density(b);
            for i in 1..m {
                s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let total = 2.0 * simpson(0.0, 2000.0, 2_000_000);
        let tail = 2.0 * simpson(t, 2000.0, 2_000_000);
        let oracle = tail / total;
        // build data with exactly this correlation: y = r x + sqrt(1-r^2) w, x ⟂ w
        let x: Vec<f64> = (0..n).map(|k| k as f64 - 5.5).collect();
        let mut w: Vec<f64> = (0..n).map(|k| ((k * 7 % 12) as f64) - 5.5).collect();
        let proj = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|b| b * b).sum::<f64>();
        for (wi, xi) in w.iter_mut().zip(&x) {
            *wi -= proj * xi;
        }
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| r * a / nx + (1.0 - r * r).sqrt() * b / nw).collect();
        let c = pearson_correlation(&x, &y).unwrap();
        assert!((c.r - r).abs() < 1e-12);
        assert!((c.p_value - oracle).abs() < 1e-6, "{} vs {}", c.p_value, oracle);
    }

    fn series(prices: &[(u32, u32, f64)]) -> PriceSeries {
        let tz = FixedOffset::east_opt(10 * 3600).unwrap();
        let (ts, vs): (Vec<_>, Vec<_>) = prices
            .iter()
            .map(|&(h, m, p)| (tz.with_ymd_and_hms(2018, 1, 3, h, m, 0).unwrap(), p))
            .unzip();
        PriceSeries::new(ts, vs).unwrap()
    }

    #[test]
    fn spike_histogram_examples() {
        let calm = series(&[(0, 0, 40.0), (13, 0, 100.0)]);
        assert_eq!(spike_histogram(&calm, 350.0), [0; 48]);
        let one = series(&[(13, 30, 80.0), (14, 0, 420.0), (14, 30, 349.9)]);
        let h = spike_histogram(&one, DEFAULT_SPIKE_THRESHOLD);
        assert_eq!(h[28], 1);
        assert_eq!(h.iter().sum::<u64>(), 1);
        let csv = spike_histogram_csv(&h);
        assert_eq!(csv.lines().count(), 49);
        assert_eq!(csv.lines().nth(29), Some("28,1"));
    }

    proptest! {
        #[test]
        fn classification_monotone(a in 0.0f64..0.2, b in 0.0f64..0.2) {
            let t = VolatilityThresholds::reference();
            for f in WeatherFactor::ALL {
                if a <= b {
                    prop_assert!(classify_volatility(f, a, &t) <= classify_volatility(f, b, &t));
                }
            }
        }

        #[test]
        fn sigma_bounded_and_monotone(l in proptest::array::uniform3(0usize..4), bump in 0usize..3) {
            use VolatilityLevel::*;
            let lv = [Normal, Low, Medium, High];
            let table = SigmaIncrementTable::default();
            let levels = PerFactor::new(lv[l[0]], lv[l[1]], lv[l[2]]);
            let s = sigma_from_levels(&levels, &table);
            prop_assert!((1.0..=3.0).contains(&s));
            let mut raised = l;
            raised[bump] = (raised[bump] + 1).min(3);
            let s2 = sigma_from_levels(&PerFactor::new(lv[raised[0]], lv[raised[1]], lv[raised[2]]), &table);
            prop_assert!(s2 >= s);
        }

        #[test]
        fn pearson_symmetric_and_affine_invariant(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(c) = pearson_correlation(&x, &y) {
                let swapped = pearson_correlation(&y, &x).unwrap();
                prop_assert!((c.r - swapped.r).abs() < 1e-12);
                let xt: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
                let moved = pearson_correlation(&xt, &y).unwrap();
                prop_assert!((c.r - moved.r).abs() < 1e-9);
            }
        }

        #[test]
        fn calibrated_cuts_ordered(xs in proptest::collection::vec(0.0f64..1.0, 100..300)) {
            let t = calibrate_factor(WeatherFactor::Temperature, &xs).unwrap();
            prop_assert!(t.low_cut <= t.med_cut && t.med_cut <= t.high_cut);
        }
    }
}
