//! Uniform-knot B-spline bases.
//!
//! A grid over `[lo, hi]` with `G` intervals and degree `k` uses the knots
//! `t_i = lo + (i - k) * h` for `i = 0..=G + 2k`, `h = (hi - lo) / G`, which
//! yields `G + k` basis functions that sum to one everywhere on `[lo, hi]`.
//! Outside the extended knot range every basis function is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable description of a [`SplineGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub grid_size: usize,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            grid_size: 3,
            order: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SplineGrid {
    lo: f64,
    hi: f64,
    grid_size: usize,
    order: usize,
    step: f64,
    knots: Vec<f64>,
}

impl TryFrom<GridSpec> for SplineGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        SplineGrid::new(spec.lo, spec.hi, spec.grid_size, spec.order)
    }
}

impl From<SplineGrid> for GridSpec {
    fn from(g: SplineGrid) -> Self {
        g.spec()
    }
}

impl SplineGrid {
    pub fn new(lo: f64, hi: f64, grid_size: usize, order: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "spline domain [{lo}, {hi}] is empty"
            )));
        }
        if grid_size == 0 {
            return Err(Error::InvalidArgument(
                "spline grid needs at least one interval".into(),
            ));
        }
        let step = (hi - lo) / grid_size as f64;
        let knots = (0..=grid_size + 2 * order)
            .map(|i| lo + (i as f64 - order as f64) * step)
            .collect();
        Ok(Self {
            lo,
            hi,
            grid_size,
            order,
            step,
            knots,
        })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            lo: self.lo,
            hi: self.hi,
            grid_size: self.grid_size,
            order: self.order,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Number of basis functions, `G + k`.
    pub fn n_basis(&self) -> usize {
        self.grid_size + self.order
    }

    /// Knot `m` of the infinite uniform extension (valid for negative `m` too).
    fn knot(&self, m: isize) -> f64 {
        self.lo + (m - self.order as isize) as f64 * self.step
    }

    /// Knot span containing `x`, or `None` outside the extended knot range.
    fn span(&self, x: f64) -> Option<isize> {
        let n_spans = (self.grid_size + 2 * self.order) as isize;
        let pos = (x - self.knots[0]) / self.step;
        if !(pos >= 0.0) {
            return None;
        }
        let mut i = pos.floor() as isize;
        if self.order == 0 && x == self.hi {
            // degree-0 bases have no extension; close the last interval on the right
            i = n_spans - 1;
        }
        (i < n_spans).then_some(i)
    }

    /// Evaluates the `k + 1` basis functions that may be nonzero at `x`.
    ///
    /// Writes their values (and optionally derivatives) into the first `k + 1`
    /// slots of the buffers and returns the global index of the first one, which
    /// can be negative or exceed `n_basis() - 1` near the ends; callers skip
    /// those entries. Returns `None` when `x` lies outside the extended knots.
    pub fn local_basis(
        &self,
        x: f64,
        values: &mut [f64],
        derivs: Option<&mut [f64]>,
    ) -> Option<isize> {
        let k = self.order;
        let i = self.span(x)?;
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        assert!(k < left.len(), "spline order above 15 is not supported");
        values[0] = 1.0;
        let mut lower = [0.0f64; 16];
        for j in 1..=k {
            if j == k {
                lower[..k].copy_from_slice(&values[..k]);
            }
            left[j] = x - self.knot(i + 1 - j as isize);
            right[j] = self.knot(i + j as isize) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        if let Some(d) = derivs {
            if k == 0 {
                d[0] = 0.0;
            } else {
                // dB_{m,k} = (B_{m,k-1} - B_{m+1,k-1}) / h on uniform knots
                let inv_h = 1.0 / self.step;
                for r in 0..=k {
                    let a = if r == 0 { 0.0 } else { lower[r - 1] };
                    let b = if r == k { 0.0 } else { lower[r] };
                    d[r] = (a - b) * inv_h;
                }
            }
        }
        Some(i - k as isize)
    }
}

/// All `G + k` basis values at `x`; at most `k + 1` are nonzero.
pub fn bspline_basis(x: f64, grid: &SplineGrid) -> Vec<f64> {
    let nb = grid.n_basis();
    let mut out = vec![0.0; nb];
    let mut vals = vec![0.0; grid.order() + 1];
    if let Some(first) = grid.local_basis(x, &mut vals, None) {
        for (r, v) in vals.iter().enumerate() {
            let idx = first + r as isize;
            if idx >= 0 && (idx as usize) < nb {
                out[idx as usize] = *v;
            }
        }
    }
    out
}

/// Derivatives of all basis functions at `x`.
pub fn bspline_basis_derivative(x: f64, grid: &SplineGrid) -> Vec<f64> {
    let nb = grid.n_basis();
    let mut out = vec![0.0; nb];
    let mut vals = vec![0.0; grid.order() + 1];
    let mut ders = vec![0.0; grid.order() + 1];
    if let Some(first) = grid.local_basis(x, &mut vals, Some(&mut ders)) {
        for (r, v) in ders.iter().enumerate() {
            let idx = first + r as isize;
            if idx >= 0 && (idx as usize) < nb {
                out[idx as usize] = *v;
            }
        }
    }
    out
}
