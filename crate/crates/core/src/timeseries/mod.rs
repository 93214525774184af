//! Hourly series containers, CSV ingestion, transforms, and window construction.
//!
//! Every series in a [`Dataset`] lives on one regular hourly grid that starts at
//! the same timestamp. Timestamps are timezone-naive market time.

mod ingest;
mod split;
mod transform;
mod window;

pub use ingest::{
    aggregate_to_hourly, ingest_csv, read_csv, write_csv, Schema, TIMESTAMP_COLUMN,
    TIMESTAMP_FORMAT,
};
pub use split::{split_expanding, Fold};
pub use transform::{asinh_apply, asinh_invert, ScalerParams, TargetTransform};
pub use window::{build_windows, FeatureSpec, WindowSample};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical exogenous series names, in the order they enter feature vectors.
pub const CANONICAL_EXOG: [&str; 5] = [
    "demand",
    "net_interchange",
    "solar_forecast",
    "wind_forecast",
    "temperature",
];

pub const PRICE: &str = "price";

/// A gap-free hourly series of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: NaiveDateTime,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: "<series>".into(),
                timestamp: start + Duration::hours(i as i64),
            });
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    /// Timestamp of the last value (equal to `start` for an empty series).
    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.values.len().saturating_sub(1))
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::hours(index as i64)
    }

    /// Grid index of `ts`, if it lies on this series' grid and inside its range.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let delta = ts - self.start;
        if delta < Duration::zero() || delta.num_seconds() % 3600 != 0 {
            return None;
        }
        let idx = delta.num_hours() as usize;
        (idx < self.values.len()).then_some(idx)
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.start, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Copy of the first `len` hours.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            start: self.start,
            values: self.values[..len.min(self.values.len())].to_vec(),
        }
    }

    fn same_grid(&self, other: &TimeSeries) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }
}

/// Named exogenous series sharing one grid. Iteration follows insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSet {
    series: Vec<(String, TimeSeries)>,
}

impl ExogenousSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a member. The new series must match the grid of existing members.
    pub fn insert(&mut self, name: impl Into<String>, ts: TimeSeries) -> Result<()> {
        let name = name.into();
        if let Some((_, first)) = self.series.first() {
            if !first.same_grid(&ts) {
                return Err(Error::Misaligned(format!(
                    "exogenous series `{name}` does not share the grid of `{}`",
                    self.series[0].0
                )));
            }
        }
        match self.series.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = ts,
            None => self.series.push((name, ts)),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TimeSeries)> {
        self.series.iter().map(|(n, s)| (n.as_str(), s))
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Price plus exogenous drivers for one market region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    region: String,
    price: TimeSeries,
    exog: ExogenousSet,
}

impl Dataset {
    pub fn new(region: impl Into<String>, price: TimeSeries, exog: ExogenousSet) -> Result<Self> {
        for (name, s) in exog.iter() {
            if !price.same_grid(s) {
                return Err(Error::Misaligned(format!(
                    "exogenous series `{name}` does not share the price grid"
                )));
            }
        }
        Ok(Self {
            region: region.into(),
            price,
            exog,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn price(&self) -> &TimeSeries {
        &self.price
    }

    pub fn exog(&self) -> &ExogenousSet {
        &self.exog
    }

    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.price.start()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.price.timestamp(index)
    }

    /// Same dataset with the price series replaced by `f(price)`.
    pub fn map_price(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self {
            region: self.region.clone(),
            price: self.price.map(f)?,
            exog: self.exog.clone(),
        })
    }

    /// Same dataset with one price value overwritten.
    pub fn with_price_at(&self, index: usize, value: f64) -> Result<Self> {
        let mut values = self.price.values.clone();
        values[index] = value;
        Ok(Self {
            region: self.region.clone(),
            price: TimeSeries::new(self.price.start, values)?,
            exog: self.exog.clone(),
        })
    }

    /// Copy restricted to the first `len` hours.
    pub fn truncated(&self, len: usize) -> Self {
        let mut exog = ExogenousSet::new();
        for (n, s) in self.exog.iter() {
            exog.series.push((n.to_string(), s.truncated(len)));
        }
        Self {
            region: self.region.clone(),
            price: self.price.truncated(len),
            exog,
        }
    }
}
