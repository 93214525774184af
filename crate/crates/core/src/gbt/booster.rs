use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grad_hess, grow_tree, RegressionTree, SortedColumns};
use super::GbtConfig;
use crate::error::{Error, Result};

/// `base_score + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Booster {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

fn draw(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<usize> {
    let k = ((rate * n as f64).round() as usize).clamp(1, n);
    if k == n {
        return (0..n).collect();
    }
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

impl Booster {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], cfg: &GbtConfig) -> Result<Self> {
        let sorted = SortedColumns::new(x);
        Self::fit_presorted(x, &sorted, y, cfg, ChaCha8Rng::seed_from_u64(cfg.seed))
    }

    fn fit_presorted(
        x: ArrayView2<'_, f64>,
        sorted: &SortedColumns,
        y: &[f64],
        cfg: &GbtConfig,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        if n < 2 {
            return Err(Error::EmptyInput("boosting needs at least two rows"));
        }
        let base_score = y.iter().sum::<f64>() / n as f64;
        let mut pred = vec![base_score; n];
        let mut trees = Vec::with_capacity(cfg.n_estimators);
        for _ in 0..cfg.n_estimators {
            let (g, h) = grad_hess(&pred, y)?;
            let rows = draw(&mut rng, n, cfg.subsample);
            let features = draw(&mut rng, x.ncols(), cfg.colsample);
            let tree = grow_tree(x, sorted, &rows, &g, &h, cfg, &features)?;
            for (r, p) in pred.iter_mut().enumerate() {
                *p +=
                    cfg.learning_rate * tree.predict(x.row(r).as_slice().expect("standard layout"));
            }
            trees.push(tree);
        }
        Ok(Self {
            base_score,
            learning_rate: cfg.learning_rate,
            n_features: x.ncols(),
            trees,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.predict_truncated(row, self.trees.len())
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_truncated(&self, row: &[f64], n_trees: usize) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let sum: f64 = self
            .trees
            .iter()
            .take(n_trees)
            .map(|t| t.predict(row))
            .sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        for t in &self.trees {
            if t.nodes.is_empty() || t.max_feature().is_some_and(|f| f >= self.n_features) {
                return Err(Error::InvalidArgument(
                    "tree references an unknown feature".into(),
                ));
            }
            for n in &t.nodes {
                if let super::Node::Split { left, right, .. } = n {
                    if *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(Error::InvalidArgument(
                            "tree child index out of range".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One booster per horizon step, all trained on the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiBooster {
    pub boosters: Vec<Booster>,
}

impl MultiBooster {
    /// Fits column `j` of `y` with its own booster. Booster `j` draws its
    /// subsamples from ChaCha stream `j` of `cfg.seed`, so results do not depend
    /// on how the work is scheduled across threads.
    pub fn fit(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &GbtConfig) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: y.nrows(),
            });
        }
        let sorted = SortedColumns::new(x);
        let boosters = (0..y.ncols())
            .into_par_iter()
            .map(|j| {
                let target: Vec<f64> = y.column(j).to_vec();
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(j as u64);
                Booster::fit_presorted(x, &sorted, &target, cfg, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { boosters })
    }

    pub fn horizon(&self) -> usize {
        self.boosters.len()
    }

    pub fn predict_multi(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.boosters.iter().map(|b| b.predict(row)).collect()
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<ndarray::Array2<f64>> {
        let mut out = ndarray::Array2::zeros((x.nrows(), self.horizon()));
        for (r, row) in x.rows().into_iter().enumerate() {
            let row: ArrayView1<'_, f64> = row;
            let p = self.predict_multi(&row.to_vec())?;
            out.row_mut(r).assign(&ArrayView1::from(&p));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        for b in &m.boosters {
            b.validate()?;
        }
        Ok(m)
    }
}
