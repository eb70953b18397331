//! Synthetic market days for demos and tests: a smooth daily price shape
//! plus afternoon spikes on stormy days.
//!
//! Every day draws a hidden storminess `s ∈ [0, 1]`. Storminess raises the
//! afternoon variability of temperature, irradiance and wind together and
//! drives the size and probability of an afternoon price spike, so weather
//! volatility is informative about spikes just as in a real market.

use chrono::{Datelike, Duration, FixedOffset, NaiveDate, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_ingest::{DayRecord, STEPS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    /// Share of days with a storm.
    pub storm_probability: f64,
    /// UTC offset of market time in hours.
    pub utc_offset_hours: i32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            days: 90,
            seed: 0,
            storm_probability: 0.25,
            utc_offset_hours: 10,
        }
    }
}

/// Storminess drawn for each day, exposed for tests.
pub fn storminess(config: &SyntheticConfig) -> Vec<f64> {
    generate_with_storminess(config).1
}

pub fn generate(config: &SyntheticConfig) -> Vec<DayRecord> {
    generate_with_storminess(config).0
}

fn bump(t: f64, centre: f64, width: f64) -> f64 {
    (-(t - centre).powi(2) / (2.0 * width * width)).exp()
}

pub fn generate_with_storminess(config: &SyntheticConfig) -> (Vec<DayRecord>, Vec<f64>) {
    let tz = FixedOffset::east_opt(config.utc_offset_hours * 3600).expect("valid offset");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut days = Vec::with_capacity(config.days);
    let mut storms = Vec::with_capacity(config.days);
    let mut gas: f64 = 9.0;
    let mut coal: f64 = 3.0;
    let tau = std::f64::consts::TAU;

    for d in 0..config.days {
        let date = config.start + Duration::days(d as i64);
        let season = (tau * date.ordinal0() as f64 / 365.0).cos();
        let s: f64 = if rng.random::<f64>() < config.storm_probability {
            0.5 + 0.5 * rng.random::<f64>()
        } else {
            0.15 * rng.random::<f64>()
        };
        storms.push(s);
        gas = (gas + 0.1 * unit.sample(&mut rng)).clamp(6.0, 14.0);
        coal = (coal + 0.03 * unit.sample(&mut rng)).clamp(2.0, 5.0);

        let daily_mean = 19.0 + 6.0 * season + 2.0 * unit.sample(&mut rng);
        let change_at = rng.random_range(26.0..34.0);
        let cloud_phase = rng.random::<f64>() * tau;
        let spike_centre = rng.random_range(28.0..36.0);
        let spike_height = if s > 0.5 {
            120.0 + 320.0 * s * rng.random::<f64>()
        } else {
            0.0
        };
        let spike_width = rng.random_range(1.5..3.5);

        let midnight = tz
            .from_local_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"))
            .single()
            .expect("fixed offset");
        let mut rec = DayRecord {
            date,
            timestamps: Vec::with_capacity(STEPS_PER_DAY),
            price: Vec::with_capacity(STEPS_PER_DAY),
            demand: Vec::with_capacity(STEPS_PER_DAY),
            temperature: Vec::with_capacity(STEPS_PER_DAY),
            irradiance: Vec::with_capacity(STEPS_PER_DAY),
            wind_speed: Vec::with_capacity(STEPS_PER_DAY),
            gas_price: vec![gas; STEPS_PER_DAY],
            coal_price: vec![coal; STEPS_PER_DAY],
        };
        for k in 0..STEPS_PER_DAY {
            let t = k as f64;
            let afternoon = (24..39).contains(&k);
            rec.timestamps.push(midnight + Duration::minutes(30 * k as i64));

            let mut temp = daily_mean + 6.0 * (tau * (t - 30.0) / 48.0).cos();
            if t > change_at {
                temp -= 8.0 * s * (1.0 - (-(t - change_at) / 3.0).exp());
            }
            if afternoon {
                temp += 1.8 * s * unit.sample(&mut rng);
            }
            temp += 0.2 * unit.sample(&mut rng);

            let clear_sky = if (12..38).contains(&k) {
                1000.0 * (std::f64::consts::PI * (t - 12.0) / 26.0).sin()
            } else {
                0.0
            };
            let cloud = (0.1 + 0.5 * s * (0.5 + 0.5 * (cloud_phase + 1.3 * t).sin()) + 0.2 * s * unit.sample(&mut rng).abs())
                .clamp(0.0, 0.95);
            let irr = (clear_sky * (1.0 - cloud)).max(0.0);

            let mut wind = 4.0 + 1.5 * (tau * (t - 32.0) / 48.0).cos() + 0.4 * unit.sample(&mut rng);
            if afternoon {
                wind += s * (4.0 + 3.0 * unit.sample(&mut rng));
            }
            let wind = wind.max(0.0);

            let demand = 5200.0
                + 160.0 * (temp - 20.0).abs()
                + 900.0 * bump(t, 36.0, 4.0)
                + 500.0 * bump(t, 16.0, 3.0)
                + 60.0 * unit.sample(&mut rng);

            let mut price = 40.0
                + 0.008 * (demand - 5200.0)
                + 18.0 * bump(t, 37.0, 3.5)
                + 8.0 * bump(t, 16.0, 2.5)
                + 1.2 * gas
                + 3.0 * unit.sample(&mut rng);
            price += spike_height * bump(t, spike_centre, spike_width);

            rec.temperature.push(temp);
            rec.irradiance.push(irr);
            rec.wind_speed.push(wind);
            rec.demand.push(demand);
            rec.price.push(price.clamp(0.0, 500.0));
        }
        days.push(rec);
    }
    (days, storms)
}
