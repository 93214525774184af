use std::ops::Range;

use chrono::NaiveDateTime;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, TimeSeries};
use crate::error::{Error, Result};

/// Describes how an anchor hour `t` turns into a feature vector and a target vector.
///
/// Lag `l` refers to the value at index `t - l + 1`, so lag 1 is the anchor hour
/// itself and lag 168 is the same hour one week before `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub lookback: usize,
    pub horizon: usize,
    pub price_lags: Vec<usize>,
    pub exog_lags: Vec<usize>,
    /// Exogenous series used as features; `None` uses every series in dataset order.
    pub exog: Option<Vec<String>>,
    /// Use every hour of the lookback window instead of the lag subsets.
    pub include_full_window: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        let mut price_lags: Vec<usize> = (1..=24).collect();
        price_lags.extend([36, 48, 72, 96, 120, 144, 168]);
        Self {
            lookback: 336,
            horizon: 168,
            price_lags,
            exog_lags: vec![1, 24, 168],
            exog: None,
            include_full_window: false,
        }
    }
}

/// One (input window, target horizon) pair anchored at hour `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub anchor: usize,
    pub timestamp: NaiveDateTime,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(Error::config(format!("features.{path}"), msg));
        if self.lookback == 0 {
            return bad("lookback", "must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon", "must be positive".into());
        }
        for (name, lags) in [
            ("price_lags", &self.price_lags),
            ("exog_lags", &self.exog_lags),
        ] {
            if self.include_full_window {
                continue;
            }
            if let Some(&l) = lags.iter().find(|&&l| l == 0 || l > self.lookback) {
                return bad(name, format!("lag {l} outside 1..={}", self.lookback));
            }
            if lags.windows(2).any(|w| w[0] >= w[1]) {
                return bad(name, "lags must be strictly increasing".into());
            }
        }
        if !self.include_full_window && self.price_lags.is_empty() {
            return bad("price_lags", "at least one price lag is required".into());
        }
        Ok(())
    }

    fn lags(&self, price: bool) -> Vec<usize> {
        if self.include_full_window {
            (1..=self.lookback).collect()
        } else if price {
            self.price_lags.clone()
        } else {
            self.exog_lags.clone()
        }
    }

    fn exog_series<'a>(&self, ds: &'a Dataset) -> Result<Vec<&'a TimeSeries>> {
        match &self.exog {
            None => Ok(ds.exog().iter().map(|(_, s)| s).collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    ds.exog()
                        .get(n)
                        .ok_or_else(|| Error::MissingColumn(n.clone()))
                })
                .collect(),
        }
    }

    /// Length of the feature vector for `ds`.
    pub fn dim(&self, ds: &Dataset) -> Result<usize> {
        let n_exog = self.exog_series(ds)?.len();
        Ok(self.lags(true).len() + n_exog * self.lags(false).len())
    }

    /// Valid anchor indices for a dataset of length `n`: `L-1 ..= n-H-1`.
    pub fn anchors(&self, n: usize) -> Range<usize> {
        let first = self.lookback - 1;
        let end = n.saturating_sub(self.horizon).max(first);
        first..end
    }

    /// Feature vector at anchor `t`: price lags first, then each exogenous series' lags.
    pub fn features_at(&self, ds: &Dataset, t: usize) -> Result<Vec<f64>> {
        if t + 1 < self.lookback || t >= ds.len() {
            return Err(Error::InvalidArgument(format!(
                "anchor {t} has no full {}-hour lookback in a series of {}",
                self.lookback,
                ds.len()
            )));
        }
        let exog = self.exog_series(ds)?;
        let price_lags = self.lags(true);
        let exog_lags = self.lags(false);
        let mut x = Vec::with_capacity(price_lags.len() + exog.len() * exog_lags.len());
        let p = ds.price().values();
        x.extend(price_lags.iter().map(|&l| p[t + 1 - l]));
        for s in exog {
            let v = s.values();
            x.extend(exog_lags.iter().map(|&l| v[t + 1 - l]));
        }
        Ok(x)
    }

    /// Target vector: price at `t+1 ..= t+H`.
    pub fn targets_at(&self, ds: &Dataset, t: usize) -> Result<Vec<f64>> {
        if t + self.horizon >= ds.len() {
            return Err(Error::TooShort {
                needed: t + self.horizon + 1,
                available: ds.len(),
            });
        }
        Ok(ds.price().values()[t + 1..=t + self.horizon].to_vec())
    }

    /// Feature matrix for the given anchors, one row per anchor.
    pub fn feature_matrix(&self, ds: &Dataset, anchors: &[usize]) -> Result<Array2<f64>> {
        let d = self.dim(ds)?;
        let mut m = Array2::zeros((anchors.len(), d));
        for (r, &t) in anchors.iter().enumerate() {
            let x = self.features_at(ds, t)?;
            m.row_mut(r).assign(&ndarray::ArrayView1::from(&x));
        }
        Ok(m)
    }

    pub fn target_matrix(&self, ds: &Dataset, anchors: &[usize]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((anchors.len(), self.horizon));
        for (r, &t) in anchors.iter().enumerate() {
            let y = self.targets_at(ds, t)?;
            m.row_mut(r).assign(&ndarray::ArrayView1::from(&y));
        }
        Ok(m)
    }
}

/// Every complete window of `ds`: `N - L - H + 1` samples in anchor order.
pub fn build_windows(ds: &Dataset, spec: &FeatureSpec) -> Result<Vec<WindowSample>> {
    spec.validate()?;
    let needed = spec.lookback + spec.horizon;
    if ds.len() < needed {
        return Err(Error::TooShort {
            needed,
            available: ds.len(),
        });
    }
    spec.anchors(ds.len())
        .map(|t| {
            Ok(WindowSample {
                anchor: t,
                timestamp: ds.timestamp(t),
                x: spec.features_at(ds, t)?,
                y: spec.targets_at(ds, t)?,
            })
        })
        .collect()
}
