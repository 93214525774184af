use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{loss_mae, KanNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_steps: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Initialization seed; the backtest derives its own per fold.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 300,
            patience: 30,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("{path}.{field}"), msg));
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive");
        }
        if self.patience == 0 || self.patience >= self.max_steps {
            return bad("patience", "must be in 1..max_steps");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1", "Adam decay rates must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Row-aligned feature and target matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl Samples {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: y.nrows(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub step: usize,
    /// Training MAE at the parameters the step's gradient was taken at.
    pub train_mae: f64,
    /// Validation MAE after the step's update.
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub steps: Vec<TrainStep>,
    pub best_step: usize,
    pub best_val_mae: f64,
    pub stopped_early: bool,
}

pub fn validation_mae(
    net: &KanNetwork,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<f64> {
    loss_mae(net.forward_batch(x)?.view(), y)
}

/// Full-batch Adam on MAE with early stopping on validation MAE.
///
/// Returns the parameters from the step with the lowest validation MAE (first
/// occurrence on ties). Training stops once `patience` consecutive steps fail
/// to improve on it.
pub fn train(
    mut net: KanNetwork,
    train: &Samples,
    val: &Samples,
    cfg: &TrainConfig,
) -> Result<(KanNetwork, TrainTrace)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("no training samples"));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("no validation samples"));
    }
    let adam = cfg.adam();
    let mut params = net.params();
    let mut state = AdamState::new(params.len());
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_step = 0;
    let mut steps = Vec::with_capacity(cfg.max_steps);
    let mut stopped_early = false;

    for step in 1..=cfg.max_steps {
        let (train_mae, grads) = net.loss_and_grad(train.x.view(), train.y.view())?;
        adam_step(&mut params, &grads.flatten(), &mut state, &adam)?;
        net.set_params(&params)?;
        let val_mae = validation_mae(&net, val.x.view(), val.y.view())?;
        if !val_mae.is_finite() || !train_mae.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "training diverged at step {step}"
            )));
        }
        steps.push(TrainStep {
            step,
            train_mae,
            val_mae,
        });
        if val_mae < best_val {
            best_val = val_mae;
            best_step = step;
            best_params.copy_from_slice(&params);
        } else if step - best_step >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    net.set_params(&best_params)?;
    Ok((
        net,
        TrainTrace {
            steps,
            best_step,
            best_val_mae: best_val,
            stopped_early,
        },
    ))
}
