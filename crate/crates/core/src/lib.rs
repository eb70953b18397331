//! Scenario-generation prediction intervals for half-hourly electricity prices.

pub mod ctsgan;
pub mod data_ingest;
pub mod error;
pub mod fsio;
pub mod intervals;
pub mod metrics;
pub mod rng;
pub mod seqnet;
pub mod stats;
pub mod synthetic;
pub mod weather_volatility;

pub use error::{Error, Result};
