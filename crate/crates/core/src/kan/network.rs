use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::spline::{bspline_basis, GridSpec, SplineGrid};
use crate::error::{Error, Result};

pub(crate) fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// One learnable univariate function `w_base * silu(x) + w_spline * spline(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanEdge {
    pub spline_coeffs: Vec<f64>,
    pub w_spline: f64,
    pub w_base: f64,
}

pub fn edge_eval(edge: &KanEdge, x: f64, grid: &SplineGrid) -> f64 {
    let basis = bspline_basis(x, grid);
    let spline: f64 = edge
        .spline_coeffs
        .iter()
        .zip(&basis)
        .map(|(c, b)| c * b)
        .sum();
    edge.w_base * silu(x) + edge.w_spline * spline
}

/// Dense layer of `out_dim x in_dim` edges plus a per-output bias.
///
/// Coefficients are stored flat as `[out][in][basis]`; scales as `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub coeffs: Vec<f64>,
    pub w_spline: Vec<f64>,
    pub w_base: Vec<f64>,
    pub bias: Vec<f64>,
}

impl KanLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, n_basis: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            coeffs: vec![0.0; out_dim * in_dim * n_basis],
            w_spline: vec![0.0; out_dim * in_dim],
            w_base: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn n_basis(&self) -> usize {
        self.coeffs.len() / (self.in_dim * self.out_dim).max(1)
    }

    pub fn edge(&self, q: usize, p: usize) -> KanEdge {
        let nb = self.n_basis();
        let e = q * self.in_dim + p;
        KanEdge {
            spline_coeffs: self.coeffs[e * nb..(e + 1) * nb].to_vec(),
            w_spline: self.w_spline[e],
            w_base: self.w_base[e],
        }
    }

    pub fn set_edge(&mut self, q: usize, p: usize, edge: &KanEdge) {
        let nb = self.n_basis();
        let e = q * self.in_dim + p;
        self.coeffs[e * nb..(e + 1) * nb].copy_from_slice(&edge.spline_coeffs);
        self.w_spline[e] = edge.w_spline;
        self.w_base[e] = edge.w_base;
    }

    fn param_count(&self) -> usize {
        self.coeffs.len() + self.w_spline.len() + self.w_base.len() + self.bias.len()
    }

    /// `[w_base, w_spline * c_0, .., w_spline * c_{nb-1}]` per edge, one row per output.
    fn effective_weights(&self, nb: usize) -> Array2<f64> {
        let stride = nb + 1;
        let mut w = Array2::zeros((self.out_dim, self.in_dim * stride));
        for q in 0..self.out_dim {
            let mut row = w.row_mut(q);
            let row = row.as_slice_mut().expect("standard layout");
            for p in 0..self.in_dim {
                let e = q * self.in_dim + p;
                row[p * stride] = self.w_base[e];
                let ws = self.w_spline[e];
                for j in 0..nb {
                    row[p * stride + 1 + j] = ws * self.coeffs[e * nb + j];
                }
            }
        }
        w
    }
}

/// Expands each input into `[silu(x), B_0(x), .., B_{nb-1}(x)]`.
fn expand(x: ArrayView2<'_, f64>, grid: &SplineGrid) -> Array2<f64> {
    let nb = grid.n_basis();
    let k = grid.order();
    let stride = nb + 1;
    let mut f = Array2::zeros((x.nrows(), x.ncols() * stride));
    let mut vals = vec![0.0; k + 1];
    for (xr, mut fr) in x.axis_iter(Axis(0)).zip(f.axis_iter_mut(Axis(0))) {
        let fr = fr.as_slice_mut().expect("standard layout");
        for (p, &v) in xr.iter().enumerate() {
            let base = p * stride;
            fr[base] = silu(v);
            if let Some(first) = grid.local_basis(v, &mut vals, None) {
                for (r, b) in vals.iter().enumerate() {
                    let j = first + r as isize;
                    if j >= 0 && (j as usize) < nb {
                        fr[base + 1 + j as usize] = *b;
                    }
                }
            }
        }
    }
    f
}

/// Gradients with the same layout as a [`KanNetwork`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct KanGradients {
    pub layers: Vec<KanLayer>,
}

impl KanGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.coeffs);
            out.extend_from_slice(&l.w_spline);
            out.extend_from_slice(&l.w_base);
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

/// Layered Kolmogorov-Arnold network sharing one spline grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KanNetwork {
    pub grid: SplineGrid,
    pub layers: Vec<KanLayer>,
}

struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    expanded: Vec<Array2<f64>>,
    weights: Vec<Array2<f64>>,
}

impl KanNetwork {
    /// Network with all parameters zero. `dims` lists every width from input to output.
    pub fn zeros(dims: &[usize], grid: GridSpec) -> Result<Self> {
        let grid = SplineGrid::try_from(grid)?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer widths {dims:?}"
            )));
        }
        let nb = grid.n_basis();
        let layers = dims
            .windows(2)
            .map(|w| KanLayer::zeros(w[0], w[1], nb))
            .collect();
        Ok(Self { grid, layers })
    }

    /// Seeded initialization: coefficients ~ N(0, 0.1^2), `w_spline = 1`,
    /// `w_base ~ U(-1/sqrt(in), 1/sqrt(in))`, zero biases.
    pub fn new(dims: &[usize], grid: GridSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dims, grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeff = Normal::new(0.0, 0.1).expect("valid normal");
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            let base = Uniform::new_inclusive(-bound, bound).expect("valid range");
            layer
                .coeffs
                .iter_mut()
                .for_each(|c| *c = coeff.sample(&mut rng));
            layer.w_spline.iter_mut().for_each(|w| *w = 1.0);
            layer
                .w_base
                .iter_mut()
                .for_each(|w| *w = base.sample(&mut rng));
        }
        Ok(net)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim));
        d
    }

    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        let last = self.layers.last_mut().expect("at least one layer");
        if bias.len() != last.out_dim {
            return Err(Error::DimensionMismatch {
                expected: last.out_dim,
                actual: bias.len(),
            });
        }
        last.bias.copy_from_slice(bias);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(KanLayer::param_count).sum()
    }

    /// Parameters in a fixed order: per layer coeffs, w_spline, w_base, bias.
    pub fn params(&self) -> Vec<f64> {
        KanGradients {
            layers: self.layers.clone(),
        }
        .flatten()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            for dst in [&mut l.coeffs, &mut l.w_spline, &mut l.w_base, &mut l.bias] {
                let n = dst.len();
                dst.copy_from_slice(&flat[off..off + n]);
                off += n;
            }
        }
        Ok(())
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, ForwardCache) {
        let nb = self.grid.n_basis();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            expanded: Vec::with_capacity(self.layers.len()),
            weights: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.to_owned();
        for layer in &self.layers {
            let f = expand(cur.view(), &self.grid);
            let w = layer.effective_weights(nb);
            let mut out = f.dot(&w.t());
            out += &ndarray::ArrayView1::from(&layer.bias);
            cache.inputs.push(std::mem::replace(&mut cur, out));
            cache.expanded.push(f);
            cache.weights.push(w);
        }
        (cur, cache)
    }

    /// Batch forward pass: one output row per input row.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let nb = self.grid.n_basis();
        let mut cur = x.to_owned();
        for layer in &self.layers {
            let f = expand(cur.view(), &self.grid);
            let mut out = f.dot(&layer.effective_weights(nb).t());
            out += &ndarray::ArrayView1::from(&layer.bias);
            cur = out;
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Mean absolute error and its exact (sub)gradient for every parameter.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
    ) -> Result<(f64, KanGradients)> {
        self.check_input(x.ncols())?;
        let (pred, cache) = self.forward_cached(x);
        if pred.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: pred.len(),
                actual: y.len(),
            });
        }
        let count = pred.len() as f64;
        let loss = loss_mae(pred.view(), y)?;
        let mut upstream = &pred - &y;
        upstream.mapv_inplace(|r| {
            if r > 0.0 {
                1.0 / count
            } else if r < 0.0 {
                -1.0 / count
            } else {
                0.0
            }
        });
        Ok((loss, self.backward_from(upstream, &cache)))
    }

    fn backward_from(&self, mut upstream: Array2<f64>, cache: &ForwardCache) -> KanGradients {
        let nb = self.grid.n_basis();
        let stride = nb + 1;
        let k = self.grid.order();
        let mut grads: Vec<KanLayer> = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let f = &cache.expanded[li];
            let dw = upstream.t().dot(f);
            let mut g = KanLayer::zeros(layer.in_dim, layer.out_dim, nb);
            for q in 0..layer.out_dim {
                let row = dw.row(q);
                g.bias[q] = upstream.column(q).sum();
                for p in 0..layer.in_dim {
                    let e = q * layer.in_dim + p;
                    g.w_base[e] = row[p * stride];
                    let ws = layer.w_spline[e];
                    let mut gws = 0.0;
                    for j in 0..nb {
                        let d = row[p * stride + 1 + j];
                        g.coeffs[e * nb + j] = ws * d;
                        gws += layer.coeffs[e * nb + j] * d;
                    }
                    g.w_spline[e] = gws;
                }
            }
            grads.push(g);
            if li == 0 {
                break;
            }
            let df = upstream.dot(&cache.weights[li]);
            let input = &cache.inputs[li];
            let mut dx = Array2::zeros(input.dim());
            let mut vals = vec![0.0; k + 1];
            let mut ders = vec![0.0; k + 1];
            for ((xr, dfr), mut dxr) in input
                .axis_iter(Axis(0))
                .zip(df.axis_iter(Axis(0)))
                .zip(dx.axis_iter_mut(Axis(0)))
            {
                for (p, &v) in xr.iter().enumerate() {
                    let base = p * stride;
                    let mut acc = dfr[base] * silu_grad(v);
                    if let Some(first) = self.grid.local_basis(v, &mut vals, Some(&mut ders)) {
                        for (r, dv) in ders.iter().enumerate() {
                            let j = first + r as isize;
                            if j >= 0 && (j as usize) < nb {
                                acc += dfr[base + 1 + j as usize] * dv;
                            }
                        }
                    }
                    dxr[p] = acc;
                }
            }
            upstream = dx;
        }
        grads.reverse();
        KanGradients { layers: grads }
    }

    /// Gradients of the mean absolute error for a batch.
    pub fn backward(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<KanGradients> {
        Ok(self.loss_and_grad(x, y)?.1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let nb = self.grid.n_basis();
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let edges = l.in_dim * l.out_dim;
            let ok = l.coeffs.len() == edges * nb
                && l.w_spline.len() == edges
                && l.w_base.len() == edges
                && l.bias.len() == l.out_dim
                && (i == 0 || self.layers[i - 1].out_dim == l.in_dim);
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} has inconsistent shapes"
                )));
            }
        }
        Ok(())
    }
}

/// Mean of `|pred - target|` over all entries.
pub fn loss_mae(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            actual: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("loss over an empty batch"));
    }
    let total: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / pred.len() as f64)
}
