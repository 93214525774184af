use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{Dataset, ExogenousSet, TimeSeries, CANONICAL_EXOG, PRICE};
use crate::error::{Error, Result};

pub const TIMESTAMP_COLUMN: &str = "timestamp";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Binds canonical series names (`price`, `demand`, ...) to CSV column headers.
///
/// An empty schema maps every non-timestamp column to a series of the same name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    columns: BTreeMap<String, String>,
}

impl Schema {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with(mut self, canonical: impl Into<String>, column: impl Into<String>) -> Self {
        self.columns.insert(canonical.into(), column.into());
        self
    }

    /// (canonical, column) pairs in feature order: price, the canonical exogenous
    /// names, then anything else alphabetically.
    fn resolve(&self, headers: &[String]) -> Result<Vec<(String, usize)>> {
        let pairs: Vec<(String, String)> = if self.columns.is_empty() {
            headers
                .iter()
                .filter(|h| h.as_str() != TIMESTAMP_COLUMN)
                .map(|h| (h.clone(), h.clone()))
                .collect()
        } else {
            self.columns
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        };
        let rank = |name: &str| -> usize {
            if name == PRICE {
                0
            } else {
                CANONICAL_EXOG
                    .iter()
                    .position(|c| *c == name)
                    .map_or(usize::MAX, |i| i + 1)
            }
        };
        let mut resolved = Vec::with_capacity(pairs.len());
        for (canonical, column) in pairs {
            let idx = headers
                .iter()
                .position(|h| *h == column)
                .ok_or_else(|| Error::MissingColumn(column.clone()))?;
            resolved.push((canonical, idx));
        }
        resolved.sort_by(|a, b| rank(&a.0).cmp(&rank(&b.0)).then_with(|| a.0.cmp(&b.0)));
        if resolved.first().map(|(n, _)| n.as_str()) != Some(PRICE) {
            return Err(Error::MissingColumn(PRICE.into()));
        }
        Ok(resolved)
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema, region: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema, region)
}

/// Parses a CSV into a validated hourly [`Dataset`]. Sub-hourly files are averaged
/// into hourly buckets first.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, region: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let ts_idx = headers
        .iter()
        .position(|h| h == TIMESTAMP_COLUMN)
        .ok_or_else(|| Error::MissingColumn(TIMESTAMP_COLUMN.into()))?;
    let columns = schema.resolve(&headers)?;

    let mut rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let raw_ts = record.get(ts_idx).unwrap_or_default();
        let ts =
            NaiveDateTime::parse_from_str(raw_ts, TIMESTAMP_FORMAT).map_err(|e| Error::Parse {
                column: TIMESTAMP_COLUMN.into(),
                value: raw_ts.into(),
                reason: e.to_string(),
            })?;
        let mut vals = Vec::with_capacity(columns.len());
        for (name, idx) in &columns {
            let raw = record.get(*idx).unwrap_or_default();
            let v: f64 = raw
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse {
                    column: name.clone(),
                    value: raw.into(),
                    reason: e.to_string(),
                })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    column: name.clone(),
                    timestamp: ts,
                });
            }
            vals.push(v);
        }
        rows.push((ts, vals));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("csv has no data rows"));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicateTimestamp(pair[0].0));
        }
    }

    let step = rows
        .windows(2)
        .map(|p| p[1].0 - p[0].0)
        .min()
        .unwrap_or_else(|| Duration::hours(1));

    let mut series: Vec<TimeSeries> = Vec::with_capacity(columns.len());
    if step < Duration::hours(1) {
        let stamps: Vec<NaiveDateTime> = rows.iter().map(|(t, _)| *t).collect();
        for c in 0..columns.len() {
            let vals: Vec<f64> = rows.iter().map(|(_, v)| v[c]).collect();
            series.push(aggregate_to_hourly(&stamps, &vals)?);
        }
    } else {
        let start = rows[0].0;
        if start.minute() != 0 || start.second() != 0 {
            return Err(Error::IrregularStep(format!("{start} is not on the hour")));
        }
        for (i, (ts, _)) in rows.iter().enumerate() {
            let expected = start + Duration::hours(i as i64);
            if *ts != expected {
                if *ts > expected {
                    return Err(Error::GridGap { missing: expected });
                }
                return Err(Error::IrregularStep(format!(
                    "{ts} is not on the hourly grid"
                )));
            }
        }
        for c in 0..columns.len() {
            series.push(TimeSeries::new(
                start,
                rows.iter().map(|(_, v)| v[c]).collect(),
            )?);
        }
    }

    let mut iter = columns.into_iter().zip(series);
    let (_, price) = iter.next().expect("price column resolved first");
    let mut exog = ExogenousSet::new();
    for ((name, _), s) in iter {
        exog.insert(name, s)?;
    }
    Dataset::new(region, price, exog)
}

/// Averages sub-hourly observations into hourly buckets (bucket = floor to the hour).
///
/// The observation step is the smallest spacing between consecutive timestamps; it
/// must divide one hour and every timestamp must sit on that step.
pub fn aggregate_to_hourly(timestamps: &[NaiveDateTime], values: &[f64]) -> Result<TimeSeries> {
    if timestamps.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: timestamps.len(),
            actual: values.len(),
        });
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyInput("no sub-hourly observations"));
    }
    let step_min = timestamps
        .windows(2)
        .map(|p| (p[1] - p[0]).num_minutes())
        .min()
        .unwrap_or(60);
    if step_min <= 0 || 60 % step_min != 0 {
        return Err(Error::IrregularStep(format!(
            "step of {step_min} minutes does not divide one hour"
        )));
    }
    let floor_hour = |t: NaiveDateTime| {
        t.with_minute(0)
            .and_then(|t| t.with_second(0))
            .and_then(|t| t.with_nanosecond(0))
            .expect("valid wall-clock time")
    };
    for t in timestamps {
        if t.second() != 0 || i64::from(t.minute()) % step_min != 0 {
            return Err(Error::IrregularStep(format!(
                "{t} is off the {step_min}-minute grid"
            )));
        }
    }
    let start = floor_hour(timestamps[0]);
    let last = floor_hour(*timestamps.last().expect("non-empty"));
    let n_hours = (last - start).num_hours() as usize + 1;
    let mut sums = vec![0.0; n_hours];
    let mut counts = vec![0usize; n_hours];
    for (t, v) in timestamps.iter().zip(values) {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                column: "<sub-hourly>".into(),
                timestamp: *t,
            });
        }
        let b = (floor_hour(*t) - start).num_hours() as usize;
        sums[b] += v;
        counts[b] += 1;
    }
    let mut out = Vec::with_capacity(n_hours);
    for (b, (s, c)) in sums.iter().zip(&counts).enumerate() {
        if *c == 0 {
            return Err(Error::EmptyBucket(start + Duration::hours(b as i64)));
        }
        out.push(s / *c as f64);
    }
    TimeSeries::new(start, out)
}

/// Writes a dataset in the same layout [`read_csv`] accepts with an identity schema.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![TIMESTAMP_COLUMN.to_string(), PRICE.to_string()];
    header.extend(ds.exog().names().map(str::to_string));
    w.write_record(&header)?;
    let exog: Vec<&TimeSeries> = ds.exog().iter().map(|(_, s)| s).collect();
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.len() {
        record.clear();
        record.push(ds.timestamp(i).format(TIMESTAMP_FORMAT).to_string());
        record.push(ds.price().values()[i].to_string());
        for s in &exog {
            record.push(s.values()[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
