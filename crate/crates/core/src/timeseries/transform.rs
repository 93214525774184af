use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln(v + sqrt(v^2 + 1))`, evaluated through `ln_1p` so small inputs keep full precision.
pub fn asinh_apply(v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput(v));
    }
    Ok(asinh(v))
}

pub fn asinh_invert(u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFiniteInput(u));
    }
    Ok(u.sinh())
}

pub(crate) fn asinh(v: f64) -> f64 {
    let a = v.abs();
    let r = if a > 1e150 {
        a.ln() + std::f64::consts::LN_2
    } else {
        (a + a * a / (1.0 + (a * a + 1.0).sqrt())).ln_1p()
    };
    r.copysign(v)
}

/// Transform applied to the forecasting target before model fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    #[default]
    Asinh,
    Identity,
}

impl TargetTransform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            TargetTransform::Asinh => asinh(v),
            TargetTransform::Identity => v,
        }
    }

    pub fn inverse(self, u: f64) -> f64 {
        match self {
            TargetTransform::Asinh => u.sinh(),
            TargetTransform::Identity => u,
        }
    }
}

/// Per-feature min/max fitted on training rows. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or(Error::EmptyInput("scaler needs at least one row"))?;
        let d = first.as_ref().len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            let row = row.as_ref();
            check_dim(d, row.len())?;
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn fit_matrix(rows: ArrayView2<'_, f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::EmptyInput("scaler needs at least one row"));
        }
        let min = rows
            .axis_iter(Axis(1))
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let max = rows
            .axis_iter(Axis(1))
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn scale_one(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (v - self.min[j]) / range
        } else {
            0.0
        }
    }

    /// Maps training min to 0 and max to 1; values outside the training range are not clamped.
    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| self.scale_one(j, v))
            .collect())
    }

    pub fn invert(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &s)| self.min[j] + s * (self.max[j] - self.min[j]))
            .collect())
    }

    pub fn apply_matrix(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.dim(), rows.ncols())?;
        let mut out = rows.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale_one(j, *v);
            }
        }
        Ok(out)
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn asinh_examples() {
        assert_eq!(asinh_apply(0.0).unwrap(), 0.0);
        assert_eq!(asinh_apply(-300.0).unwrap(), -asinh_apply(300.0).unwrap());
        let expected = (1.0f64 + 2.0f64.sqrt()).ln();
        assert!((asinh_apply(1.0).unwrap() - expected).abs() < 1e-12);
        assert!((asinh_apply(1.0).unwrap() - 0.881374).abs() < 1e-5);
        assert!(asinh_apply(f64::NAN).is_err());
        assert!(asinh_invert(f64::INFINITY).is_err());
    }

    #[test]
    fn scaler_examples() {
        let p = ScalerParams::fit(&[[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]).unwrap();
        assert_eq!(p.apply(&[4.0, 5.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(p.apply(&[8.0, 5.0]).unwrap()[0], 1.5);
        assert_eq!(p.apply(&[2.0, 5.0]).unwrap()[0], 0.0);
        assert_eq!(p.apply(&[6.0, 5.0]).unwrap()[0], 1.0);
        assert!(matches!(
            p.apply(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
        let rows: [[f64; 2]; 0] = [];
        assert!(ScalerParams::fit(&rows).is_err());
    }

    #[test]
    fn matrix_fit_matches_row_fit() {
        let m = ndarray::array![[1.0, -3.0], [7.0, 2.0], [4.0, 0.5]];
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        let a = ScalerParams::fit(&rows).unwrap();
        let b = ScalerParams::fit_matrix(m.view()).unwrap();
        assert_eq!(a, b);
        let scaled = b.apply_matrix(m.view()).unwrap();
        assert_eq!(scaled.row(1).to_vec(), b.apply(&rows[1]).unwrap());
    }

    proptest! {
        #[test]
        fn asinh_round_trip(v in -1e6f64..1e6) {
            let back = asinh_invert(asinh_apply(v).unwrap()).unwrap();
            prop_assert!((back - v).abs() <= 1e-10 * v.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn asinh_round_trip_tiny(v in -1e-3f64..1e-3) {
            let back = asinh_invert(asinh_apply(v).unwrap()).unwrap();
            prop_assert!((back - v).abs() <= 1e-10 * v.abs());
        }

        #[test]
        fn scaler_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 2..20),
            probe in prop::collection::vec(-1e4f64..1e4, 3),
        ) {
            let p = ScalerParams::fit(&rows).unwrap();
            let back = p.invert(&p.apply(&probe).unwrap()).unwrap();
            for j in 0..3 {
                if p.max[j] > p.min[j] {
                    let scale = probe[j].abs().max(p.max[j].abs()).max(p.min[j].abs());
                    prop_assert!((back[j] - probe[j]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
