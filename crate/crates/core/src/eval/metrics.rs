use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("metric input"));
    }
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    Ok(())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    Ok(pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / actual.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let mse = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mse.sqrt())
}

/// `model_mae / naive_mae`; undefined when the naive MAE is zero.
pub fn rmae(model_mae: f64, naive_mae: f64) -> Result<f64> {
    if !(naive_mae > 0.0) || !naive_mae.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "naive MAE must be positive, got {naive_mae}"
        )));
    }
    Ok(model_mae / naive_mae)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    /// Absent when the naive reference has zero error.
    pub rmae: Option<f64>,
}

impl MetricSet {
    pub fn compute(pred: &[f64], actual: &[f64], naive_mae: f64) -> Result<Self> {
        let mae = mae(pred, actual)?;
        Ok(Self {
            mae,
            rmse: rmse(pred, actual)?,
            rmae: rmae(mae, naive_mae).ok(),
        })
    }
}
