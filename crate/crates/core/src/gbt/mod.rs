//! Gradient-boosted regression trees with exact greedy second-order splits.
//!
//! Squared-error objective with `g = pred - y`, `h = 1`; leaf weight
//! `-G / (H + lambda)`. Direct multi-step forecasts use one [`Booster`] per
//! horizon step ([`MultiBooster`]).

mod booster;
mod tree;

pub use booster::{Booster, MultiBooster};
pub use tree::{build_tree, grad_hess, split_gain, Node, RegressionTree, SortedColumns};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Subsampling seed; the backtest derives its own per fold.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_estimators: 500,
            max_depth: 6,
            learning_rate: 0.05,
            subsample: 0.8,
            colsample: 0.8,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("{path}.{field}"), msg));
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.learning_rate) {
            return bad("learning_rate", "must lie in (0, 1]");
        }
        if !unit(self.subsample) {
            return bad("subsample", "must lie in (0, 1]");
        }
        if !unit(self.colsample) {
            return bad("colsample", "must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda", "must be non-negative");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", "must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight", "must be non-negative");
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be at least 1");
        }
        Ok(())
    }
}
