//! Convex combination of the KAN and boosted-tree forecasts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight on the KAN forecast; the boosted trees receive `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EnsembleWeight(f64);

impl EnsembleWeight {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EnsembleWeight {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EnsembleWeight> for f64 {
    fn from(w: EnsembleWeight) -> f64 {
        w.0
    }
}

/// `alpha * kan + (1 - alpha) * gbt`, elementwise.
pub fn combine(pred_kan: &[f64], pred_gbt: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let w = EnsembleWeight::new(alpha)?;
    if pred_kan.len() != pred_gbt.len() {
        return Err(Error::DimensionMismatch {
            expected: pred_kan.len(),
            actual: pred_gbt.len(),
        });
    }
    let a = w.alpha();
    Ok(pred_kan
        .iter()
        .zip(pred_gbt)
        .map(|(k, g)| a * k + (1.0 - a) * g)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaLoss {
    pub alpha: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSelection {
    pub weight: EnsembleWeight,
    pub table: Vec<AlphaLoss>,
}

impl AlphaSelection {
    pub fn alpha(&self) -> f64 {
        self.weight.alpha()
    }

    /// Loss recorded for the grid point closest to `alpha`.
    pub fn loss_at(&self, alpha: f64) -> Option<f64> {
        self.table
            .iter()
            .min_by(|a, b| (a.alpha - alpha).abs().total_cmp(&(b.alpha - alpha).abs()))
            .map(|r| r.mae)
    }
}

/// Evaluates validation MAE on the grid `{0, step, .., 1}` and returns the best
/// weight. Equal losses resolve towards 0.5, then towards the smaller weight.
pub fn select_alpha(
    pred_kan: &[f64],
    pred_gbt: &[f64],
    y_val: &[f64],
    grid_step: f64,
) -> Result<AlphaSelection> {
    if y_val.is_empty() {
        return Err(Error::EmptyInput("validation set"));
    }
    if pred_kan.len() != y_val.len() || pred_gbt.len() != y_val.len() {
        return Err(Error::DimensionMismatch {
            expected: y_val.len(),
            actual: pred_kan.len().min(pred_gbt.len()),
        });
    }
    let n_steps = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || n_steps < 1.0 || (n_steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    let n_steps = n_steps as usize;
    let mut table = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let alpha = i as f64 / n_steps as f64;
        let blended = combine(pred_kan, pred_gbt, alpha)?;
        let mae = blended
            .iter()
            .zip(y_val)
            .map(|(p, y)| (p - y).abs())
            .sum::<f64>()
            / y_val.len() as f64;
        table.push(AlphaLoss { alpha, mae });
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            a.mae
                .total_cmp(&b.mae)
                .then((a.alpha - 0.5).abs().total_cmp(&(b.alpha - 0.5).abs()))
                .then(a.alpha.total_cmp(&b.alpha))
        })
        .expect("grid is non-empty");
    Ok(AlphaSelection {
        weight: EnsembleWeight::new(best.alpha)?,
        table,
    })
}
