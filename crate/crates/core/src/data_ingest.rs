//! Loading, validation, clipping, normalization and featurization of
//! half-hourly market and weather observations.
//!
//! Timestamps are interpreted in local market time (the offset carried by
//! each ISO-8601 timestamp). Half-hour index 0 is the interval starting at
//! 00:00 and index 47 the one starting at 23:30.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-hour intervals in one market day.
pub const STEPS_PER_DAY: usize = 48;

/// Default price clip range, A$/MWh.
pub const PRICE_FLOOR: f64 = 0.0;
pub const PRICE_CAP: f64 = 500.0;

/// Base temperature for degree-day computation, °C.
pub const DEFAULT_HDD_BASE: f64 = 18.0;

/// Degree days enter the network input divided by this many °C·day.
pub const DEGREE_DAY_SCALE: f64 = 10.0;

/// Total width of [`ConditionVector::features`].
pub const CONDITION_DIM: usize = 5 * STEPS_PER_DAY + 7 + 12 + 4;

const HALF_HOUR_SECS: i64 = 30 * 60;

/// Half-hour-of-day index of a timestamp in its own local offset.
pub fn half_hour_index(ts: &DateTime<FixedOffset>) -> usize {
    (ts.hour() * 2 + ts.minute() / 30) as usize
}

fn validate_grid(timestamps: &[DateTime<FixedOffset>]) -> Result<()> {
    for (i, ts) in timestamps.iter().enumerate() {
        if ts.minute() % 30 != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(Error::MalformedRow {
                line: i + 1,
                reason: format!("timestamp {ts} is not on the half-hour grid"),
            });
        }
    }
    for (i, pair) in timestamps.windows(2).enumerate() {
        let gap = (pair[1] - pair[0]).num_seconds();
        if gap <= 0 || gap % HALF_HOUR_SECS != 0 {
            return Err(Error::NonMonotonicTimestamps { line: i + 2 });
        }
    }
    Ok(())
}

/// Half-hourly price observations in A$/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<DateTime<FixedOffset>>,
    values: Vec<f64>,
}

impl PriceSeries {
    /// Timestamps must be strictly increasing and aligned to the half-hour grid.
    pub fn new(timestamps: Vec<DateTime<FixedOffset>>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        validate_grid(&timestamps)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("price series"));
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[DateTime<FixedOffset>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Half-hourly weather observations aligned with a price series.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub timestamps: Vec<DateTime<FixedOffset>>,
    /// °C
    pub temperature: Vec<f64>,
    /// Shortwave irradiance, W/m²
    pub irradiance: Vec<f64>,
    /// m/s
    pub wind_speed: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(
        timestamps: Vec<DateTime<FixedOffset>>,
        temperature: Vec<f64>,
        irradiance: Vec<f64>,
        wind_speed: Vec<f64>,
    ) -> Result<Self> {
        for len in [temperature.len(), irradiance.len(), wind_speed.len()] {
            if len != timestamps.len() {
                return Err(Error::LengthMismatch {
                    left: timestamps.len(),
                    right: len,
                });
            }
        }
        validate_grid(&timestamps)?;
        if irradiance.iter().chain(&wind_speed).any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(
                "irradiance and wind speed must be non-negative".into(),
            ));
        }
        Ok(Self {
            timestamps,
            temperature,
            irradiance,
            wind_speed,
        })
    }

    /// True when both series share the same timestamp grid.
    pub fn is_aligned_with(&self, prices: &PriceSeries) -> bool {
        self.timestamps == prices.timestamps
    }
}

/// Clamp every price into `[lo, hi]`.
pub fn clip_prices(series: &PriceSeries, lo: f64, hi: f64) -> PriceSeries {
    PriceSeries {
        timestamps: series.timestamps.clone(),
        values: series.values.iter().map(|v| v.max(lo).min(hi)).collect(),
    }
}

/// Min-max scaling parameters for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    p_min: f64,
    p_max: f64,
}

impl MinMaxParams {
    pub fn new(p_min: f64, p_max: f64) -> Result<Self> {
        if !(p_min.is_finite() && p_max.is_finite()) || p_max <= p_min {
            return Err(Error::DegenerateRange {
                min: p_min,
                max: p_max,
            });
        }
        Ok(Self { p_min, p_max })
    }

    /// Fit to the observed range of `values`.
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if lo > hi {
            return Err(Error::EmptyInput);
        }
        Self::new(lo, hi)
    }

    pub fn min(&self) -> f64 {
        self.p_min
    }

    pub fn max(&self) -> f64 {
        self.p_max
    }

    pub fn range(&self) -> f64 {
        self.p_max - self.p_min
    }

    pub fn normalize(&self, p: f64) -> f64 {
        (p - self.p_min) / (self.p_max - self.p_min)
    }

    pub fn denormalize(&self, p: f64) -> f64 {
        self.p_min + p * (self.p_max - self.p_min)
    }
}

pub fn normalize(values: &[f64], params: &MinMaxParams) -> Vec<f64> {
    values.iter().map(|&v| params.normalize(v)).collect()
}

pub fn denormalize(values: &[f64], params: &MinMaxParams) -> Vec<f64> {
    values.iter().map(|&v| params.denormalize(v)).collect()
}

/// Heating and cooling degree days, °C·day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeDays {
    pub hdd: f64,
    pub cdd: f64,
}

/// Daily-mean method: `hdd = max(0, base - mean)`, `cdd = max(0, mean - base)`.
pub fn compute_hdd_cdd(daily_temps: &[f64], base: f64) -> Result<DegreeDays> {
    if daily_temps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = daily_temps.iter().sum::<f64>() / daily_temps.len() as f64;
    Ok(DegreeDays {
        hdd: (base - mean).max(0.0),
        cdd: (mean - base).max(0.0),
    })
}

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub timestamp: String,
    pub price: String,
    pub demand: String,
    pub temperature: String,
    pub irradiance: String,
    pub wind_speed: String,
    pub gas_price: String,
    pub coal_price: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            price: "price".into(),
            demand: "demand".into(),
            temperature: "temperature".into(),
            irradiance: "irradiance".into(),
            wind_speed: "wind_speed".into(),
            gas_price: "gas_price".into(),
            coal_price: "coal_price".into(),
        }
    }
}

impl Schema {
    fn channel_names(&self) -> [&str; 8] {
        [
            &self.timestamp,
            &self.price,
            &self.demand,
            &self.temperature,
            &self.irradiance,
            &self.wind_speed,
            &self.gas_price,
            &self.coal_price,
        ]
    }
}

/// One complete market day of raw observations (48 values per channel).
///
/// Prices are stored after clipping to the configured range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub timestamps: Vec<DateTime<FixedOffset>>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    pub temperature: Vec<f64>,
    pub irradiance: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub gas_price: Vec<f64>,
    pub coal_price: Vec<f64>,
}

impl DayRecord {
    pub fn mean_gas_price(&self) -> f64 {
        mean(&self.gas_price)
    }

    pub fn mean_coal_price(&self) -> f64 {
        mean(&self.coal_price)
    }

    /// The day's observed weather, used as a perfect forecast proxy.
    pub fn weather_forecast(&self) -> WeatherForecast {
        WeatherForecast {
            temperature: Some(self.temperature.clone()),
            irradiance: Some(self.irradiance.clone()),
            wind: Some(self.wind_speed.clone()),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Summary of what the loader consumed and discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_consumed: usize,
    pub days_complete: usize,
    pub days_dropped: usize,
    pub dropped_dates: Vec<NaiveDate>,
}

impl LoadReport {
    pub fn summary(&self) -> String {
        format!(
            "{} day{} dropped",
            self.days_dropped,
            if self.days_dropped == 1 { "" } else { "s" }
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-channel scaling parameters.
///
/// Prices always use the fixed clip range; every other channel is fitted on
/// the days passed to [`NormParams::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub price: MinMaxParams,
    pub demand: MinMaxParams,
    pub temperature: MinMaxParams,
    pub irradiance: MinMaxParams,
    pub wind_speed: MinMaxParams,
    pub gas_price: MinMaxParams,
    pub coal_price: MinMaxParams,
}

impl NormParams {
    pub fn fit(days: &[DayRecord]) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::EmptyDataset);
        }
        // A channel that is constant over the split maps to 0.
        let fit = |f: fn(&DayRecord) -> &Vec<f64>| {
            match MinMaxParams::fit(days.iter().flat_map(|d| f(d).iter().copied())) {
                Err(Error::DegenerateRange { min, .. }) => MinMaxParams::new(min, min + 1.0),
                other => other,
            }
        };
        Ok(Self {
            price: MinMaxParams::new(PRICE_FLOOR, PRICE_CAP)?,
            demand: fit(|d| &d.demand)?,
            temperature: fit(|d| &d.temperature)?,
            irradiance: fit(|d| &d.irradiance)?,
            wind_speed: fit(|d| &d.wind_speed)?,
            gas_price: fit(|d| &d.gas_price)?,
            coal_price: fit(|d| &d.coal_price)?,
        })
    }
}

/// Normalize and clamp into `[0, 1]`; out-of-range values come from days
/// outside the fitting split.
fn scale_unit(values: &[f64], params: &MinMaxParams) -> Vec<f64> {
    values
        .iter()
        .map(|&v| params.normalize(v).clamp(0.0, 1.0))
        .collect()
}

/// Forecast weather for the target day in physical units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeatherForecast {
    pub temperature: Option<Vec<f64>>,
    pub irradiance: Option<Vec<f64>>,
    pub wind: Option<Vec<f64>>,
}

/// Per-day conditioning features for the generator and discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector {
    pub lagged_prices: Vec<f64>,
    pub lagged_demand: Vec<f64>,
    pub day_of_week: [f64; 7],
    pub month: [f64; 12],
    pub hdd: f64,
    pub cdd: f64,
    pub gas_price: f64,
    pub coal_price: f64,
    pub forecast_temperature: Vec<f64>,
    pub forecast_irradiance: Vec<f64>,
    pub forecast_wind: Vec<f64>,
}

impl ConditionVector {
    /// Flat network input of width [`CONDITION_DIM`].
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(CONDITION_DIM);
        out.extend_from_slice(&self.lagged_prices);
        out.extend_from_slice(&self.lagged_demand);
        out.extend_from_slice(&self.day_of_week);
        out.extend_from_slice(&self.month);
        out.push(self.hdd / DEGREE_DAY_SCALE);
        out.push(self.cdd / DEGREE_DAY_SCALE);
        out.push(self.gas_price);
        out.push(self.coal_price);
        out.extend_from_slice(&self.forecast_temperature);
        out.extend_from_slice(&self.forecast_irradiance);
        out.extend_from_slice(&self.forecast_wind);
        out
    }
}

fn one_hot<const N: usize>(index: usize) -> [f64; N] {
    let mut v = [0.0; N];
    v[index] = 1.0;
    v
}

fn require_day(channel: &str, values: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    match values {
        Some(v) if v.len() == STEPS_PER_DAY && v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
        Some(v) => Err(Error::shape(
            format!("{STEPS_PER_DAY} finite {channel} values"),
            v.len(),
        )),
        None => Err(Error::MissingChannel(channel.into())),
    }
}

/// Encode the condition for `date` from the previous day's observations and
/// the weather forecast for `date`.
///
/// Calendar encoding: `day_of_week[0]` is Monday, `month[0]` is January.
pub fn build_conditions(
    previous: &DayRecord,
    date: NaiveDate,
    forecast: &WeatherForecast,
    norm: &NormParams,
    hdd_base: f64,
) -> Result<ConditionVector> {
    if previous.price.len() != STEPS_PER_DAY || previous.demand.len() != STEPS_PER_DAY {
        return Err(Error::shape(
            format!("{STEPS_PER_DAY}-step previous day"),
            previous.price.len(),
        ));
    }
    let temperature = require_day("temperature", &forecast.temperature)?;
    let irradiance = require_day("irradiance", &forecast.irradiance)?;
    let wind = require_day("wind", &forecast.wind)?;
    let degree_days = compute_hdd_cdd(&temperature, hdd_base)?;

    Ok(ConditionVector {
        lagged_prices: scale_unit(&previous.price, &norm.price),
        lagged_demand: scale_unit(&previous.demand, &norm.demand),
        day_of_week: one_hot(date.weekday().num_days_from_monday() as usize),
        month: one_hot(date.month0() as usize),
        hdd: degree_days.hdd,
        cdd: degree_days.cdd,
        gas_price: norm.gas_price.normalize(previous.mean_gas_price()).clamp(0.0, 1.0),
        coal_price: norm
            .coal_price
            .normalize(previous.mean_coal_price())
            .clamp(0.0, 1.0),
        forecast_temperature: scale_unit(&temperature, &norm.temperature),
        forecast_irradiance: scale_unit(&irradiance, &norm.irradiance),
        forecast_wind: scale_unit(&wind, &norm.wind_speed),
    })
}

/// Normalized weather of one day, the input to volatility scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeather {
    pub temperature: Vec<f64>,
    pub irradiance: Vec<f64>,
    pub wind: Vec<f64>,
}

impl NormalizedWeather {
    pub fn from_forecast(forecast: &WeatherForecast, norm: &NormParams) -> Result<Self> {
        Ok(Self {
            temperature: scale_unit(&require_day("temperature", &forecast.temperature)?, &norm.temperature),
            irradiance: scale_unit(&require_day("irradiance", &forecast.irradiance)?, &norm.irradiance),
            wind: scale_unit(&require_day("wind", &forecast.wind)?, &norm.wind_speed),
        })
    }
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub date: NaiveDate,
    pub condition: ConditionVector,
    /// Normalized 48-step price path of `date`.
    pub target: Vec<f64>,
    pub weather: NormalizedWeather,
}

/// Complete, validated market days plus the scaling parameters in force.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    days: Vec<DayRecord>,
    norm: NormParams,
    report: LoadReport,
}

impl Dataset {
    /// Build from complete days; normalization is fitted on `days`.
    pub fn from_days(days: Vec<DayRecord>) -> Result<Self> {
        let norm = NormParams::fit(&days)?;
        let report = LoadReport {
            rows_read: days.len() * STEPS_PER_DAY,
            rows_consumed: days.len() * STEPS_PER_DAY,
            days_complete: days.len(),
            ..LoadReport::default()
        };
        Self::with_norm(days, norm, report)
    }

    pub fn with_norm(days: Vec<DayRecord>, norm: NormParams, report: LoadReport) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if days.windows(2).any(|w| w[1].date <= w[0].date) {
            return Err(Error::NonMonotonicTimestamps { line: 0 });
        }
        Ok(Self { days, norm, report })
    }

    pub fn days(&self) -> &[DayRecord] {
        &self.days
    }

    pub fn norm(&self) -> &NormParams {
        &self.norm
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day(&self, date: NaiveDate) -> Option<&DayRecord> {
        self.days
            .binary_search_by_key(&date, |d| d.date)
            .ok()
            .map(|i| &self.days[i])
    }

    /// Split into days before `date` and days on or after it. The training
    /// part is refitted; the test part reuses the training parameters.
    pub fn split_at(&self, date: NaiveDate) -> Result<(Dataset, Dataset)> {
        let (train, test): (Vec<_>, Vec<_>) =
            self.days.iter().cloned().partition(|d| d.date < date);
        let train = Dataset::from_days(train)?;
        let norm = train.norm;
        let test_report = LoadReport {
            rows_read: test.len() * STEPS_PER_DAY,
            rows_consumed: test.len() * STEPS_PER_DAY,
            days_complete: test.len(),
            ..LoadReport::default()
        };
        let test = Dataset::with_norm(test, norm, test_report)?;
        Ok((train, test))
    }

    /// Replace the scaling parameters, e.g. with ones fitted on a training split.
    pub fn renormalized(&self, norm: NormParams) -> Dataset {
        Dataset {
            days: self.days.clone(),
            norm,
            report: self.report.clone(),
        }
    }

    /// Sample for `date`, built from the previous calendar day.
    pub fn sample(&self, date: NaiveDate, hdd_base: f64) -> Result<Sample> {
        let day = self.day(date).ok_or(Error::MissingDay(date))?;
        let prev_date = date.pred_opt().ok_or(Error::MissingDay(date))?;
        let prev = self.day(prev_date).ok_or(Error::MissingDay(prev_date))?;
        self.sample_from(prev, day, hdd_base)
    }

    fn sample_from(&self, prev: &DayRecord, day: &DayRecord, hdd_base: f64) -> Result<Sample> {
        let forecast = day.weather_forecast();
        Ok(Sample {
            date: day.date,
            condition: build_conditions(prev, day.date, &forecast, &self.norm, hdd_base)?,
            target: scale_unit(&day.price, &self.norm.price),
            weather: NormalizedWeather::from_forecast(&forecast, &self.norm)?,
        })
    }

    /// Every day whose previous calendar day is also present.
    pub fn samples(&self, hdd_base: f64) -> Result<Vec<Sample>> {
        self.days
            .windows(2)
            .filter(|w| w[0].date.succ_opt() == Some(w[1].date))
            .map(|w| self.sample_from(&w[0], &w[1], hdd_base))
            .collect()
    }

    /// Concatenated price observations of all complete days.
    pub fn price_series(&self) -> Result<PriceSeries> {
        PriceSeries::new(
            self.days.iter().flat_map(|d| d.timestamps.iter().copied()).collect(),
            self.days.iter().flat_map(|d| d.price.iter().copied()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Row {
    ts: DateTime<FixedOffset>,
    values: Option<[f64; 7]>,
}

fn parse_field(raw: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("column {column}: cannot parse {raw:?} as a number"),
    })?;
    Ok(v.is_finite().then_some(v))
}

/// Read a CSV with the given column mapping, validate the timestamp grid,
/// clip prices to the default range, and drop every day that is missing a
/// half-hour or has an empty cell.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

/// [`load_dataset`] over any reader.
pub fn read_dataset<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(schema.channel_names()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(columns[i]).unwrap_or("");
        let ts = DateTime::parse_from_rfc3339(field(0).trim()).map_err(|e| Error::MalformedRow {
            line,
            reason: format!("timestamp {:?}: {e}", field(0)),
        })?;
        if ts.minute() % 30 != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("timestamp {ts} is not on the half-hour grid"),
            });
        }
        if let Some(prev) = rows.last().map(|r: &Row| r.ts) {
            let gap = (ts - prev).num_seconds();
            if gap <= 0 {
                return Err(Error::NonMonotonicTimestamps { line });
            }
        }
        let mut values = [0.0; 7];
        let mut complete = true;
        for (k, v) in values.iter_mut().enumerate() {
            match parse_field(field(k + 1), line, schema.channel_names()[k + 1])? {
                Some(x) => *v = x,
                None => complete = false,
            }
        }
        rows.push(Row {
            ts,
            values: complete.then_some(values),
        });
    }

    let rows_read = rows.len();
    let mut by_day: BTreeMap<NaiveDate, Vec<Row>> = BTreeMap::new();
    for row in rows {
        by_day.entry(row.ts.date_naive()).or_default().push(row);
    }

    let mut report = LoadReport {
        rows_read,
        ..LoadReport::default()
    };
    let mut days = Vec::new();
    for (date, rows) in by_day {
        let complete = rows.len() == STEPS_PER_DAY
            && rows
                .iter()
                .enumerate()
                .all(|(k, r)| half_hour_index(&r.ts) == k && r.values.is_some());
        if !complete {
            report.days_dropped += 1;
            report.dropped_dates.push(date);
            continue;
        }
        let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r.values.unwrap()[k]).collect() };
        days.push(DayRecord {
            date,
            timestamps: rows.iter().map(|r| r.ts).collect(),
            price: col(0).into_iter().map(|p| p.clamp(PRICE_FLOOR, PRICE_CAP)).collect(),
            demand: col(1),
            temperature: col(2),
            irradiance: col(3),
            wind_speed: col(4),
            gas_price: col(5),
            coal_price: col(6),
        });
        report.rows_consumed += STEPS_PER_DAY;
    }
    report.days_complete = days.len();
    if days.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let norm = NormParams::fit(&days)?;
    Dataset::with_norm(days, norm, report)
}

/// Write days in the input CSV layout (default schema).
pub fn write_csv<W: std::io::Write>(writer: W, days: &[DayRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(Schema::default().channel_names())?;
    for day in days {
        for k in 0..STEPS_PER_DAY {
            wtr.write_record([
                day.timestamps[k].to_rfc3339(),
                day.price[k].to_string(),
                day.demand[k].to_string(),
                day.temperature[k].to_string(),
                day.irradiance[k].to_string(),
                day.wind_speed[k].to_string(),
                day.gas_price[k].to_string(),
                day.coal_price[k].to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
