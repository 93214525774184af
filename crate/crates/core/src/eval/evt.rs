use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-interpolation quantile at rank `q * (n - 1)` of the ascending sample.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = q * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let frac = rank - lo as f64;
    Ok(s[lo] + frac * (s[hi] - s[lo]))
}

/// Error statistics restricted to hours whose actual value exceeds a high quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub q: f64,
    pub threshold: f64,
    pub exceedance_count: usize,
    /// Absent when no observation exceeds the threshold.
    pub extreme_mae: Option<f64>,
}

pub fn evt_extreme_mae(pred: &[f64], actual: &[f64], q: f64) -> Result<ExtremeReport> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {q} outside (0, 1)"
        )));
    }
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    let threshold = empirical_quantile(actual, q)?;
    let (mut count, mut sum) = (0usize, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        if *a > threshold {
            count += 1;
            sum += (p - a).abs();
        }
    }
    Ok(ExtremeReport {
        q,
        threshold,
        exceedance_count: count,
        extreme_mae: (count > 0).then(|| sum / count as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_values() {
        let actual: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = evt_extreme_mae(&actual, &actual, 0.95).unwrap();
        assert!((r.threshold - 95.05).abs() < 1e-9);
        assert_eq!(r.exceedance_count, 5);
        assert_eq!(r.extreme_mae, Some(0.0));

        let pred: Vec<f64> = actual
            .iter()
            .map(|a| a + if *a > 95.05 { 2.0 } else { 100.0 })
            .collect();
        assert_eq!(
            evt_extreme_mae(&pred, &actual, 0.95).unwrap().extreme_mae,
            Some(2.0)
        );
    }

    #[test]
    fn constant_actual_has_no_tail() {
        let actual = vec![5.0; 40];
        let r = evt_extreme_mae(&actual, &actual, 0.95).unwrap();
        assert_eq!(r.threshold, 5.0);
        assert_eq!(r.exceedance_count, 0);
        assert_eq!(r.extreme_mae, None);
    }

    #[test]
    fn quantile_edges_and_errors() {
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 1.0).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.25).unwrap(), 1.5);
        assert_eq!(empirical_quantile(&[7.0], 0.9).unwrap(), 7.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(evt_extreme_mae(&[1.0], &[1.0], 1.0).is_err());
        assert!(evt_extreme_mae(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn exceedance_count_tracks_tail_mass() {
        for n in [20usize, 99, 100, 101, 500, 8760] {
            let actual: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
            let r = evt_extreme_mae(&actual, &actual, 0.95).unwrap();
            let expected = 0.05 * n as f64;
            assert!(
                (r.exceedance_count as f64 - expected).abs() <= 1.0,
                "n={n} count={}",
                r.exceedance_count
            );
        }
    }
}
