//! Reference forecasters: persistence, weekly persistence, and a ridge-stabilised
//! linear autoregression with exogenous lags.
//!
//! `LinearArx` is a plain least-squares stand-in for a statistical baseline; it is
//! not a SARIMAX model.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEEK: usize = 168;
pub const ARX_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    NaiveLast,
    SeasonalNaive168,
    LinearArx,
}

/// Repeats the last observed value `horizon` times.
pub fn naive_forecast(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = *history
        .last()
        .ok_or(Error::EmptyInput("naive forecast history"))?;
    Ok(vec![last; horizon])
}

/// Element `h` (1-based) repeats the value observed at `t - 168 + h`, where `t`
/// is the last history index.
pub fn seasonal_naive_forecast(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if history.len() < WEEK {
        return Err(Error::TooShort {
            needed: WEEK,
            available: history.len(),
        });
    }
    let t = history.len() - 1;
    Ok((1..=horizon)
        .map(|h| history[t + h - WEEK - WEEK * ((h - 1) / WEEK)])
        .collect())
}

/// Per-horizon-step least squares with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArx {
    /// `(d + 1) x H`: intercept row first.
    pub weights: Vec<Vec<f64>>,
}

impl LinearArx {
    /// Solves `(X'X + ridge * I') W = X'Y` where `I'` leaves the intercept unpenalised.
    pub fn fit(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if y.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.nrows(),
            });
        }
        if n < d + 1 {
            return Err(Error::TooShort {
                needed: d + 1,
                available: n,
            });
        }
        let design = DMatrix::from_fn(n, d + 1, |r, c| if c == 0 { 1.0 } else { x[[r, c - 1]] });
        let targets = DMatrix::from_fn(n, y.ncols(), |r, c| y[[r, c]]);
        let mut gram = design.transpose() * &design;
        for i in 1..=d {
            gram[(i, i)] += ARX_RIDGE;
        }
        let rhs = design.transpose() * targets;
        let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
        let w = chol.solve(&rhs);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient);
        }
        let weights = (0..=d)
            .map(|i| w.row(i).iter().copied().collect())
            .collect();
        Ok(Self { weights })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.weights.len() - 1;
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let feats = DVector::from_iterator(d + 1, std::iter::once(1.0).chain(x.iter().copied()));
        let horizon = self.weights[0].len();
        Ok((0..horizon)
            .map(|h| {
                self.weights
                    .iter()
                    .zip(feats.iter())
                    .map(|(w, f)| w[h] * f)
                    .sum()
            })
            .collect())
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let horizon = self.weights[0].len();
        let mut out = Array2::zeros((x.nrows(), horizon));
        for (r, row) in x.rows().into_iter().enumerate() {
            let p = self.predict(&row.to_vec())?;
            out.row_mut(r).assign(&ndarray::ArrayView1::from(&p));
        }
        Ok(out)
    }
}
