use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::evt::{evt_extreme_mae, ExtremeReport};
use super::metrics::{mae, MetricSet};
use crate::baselines::{naive_forecast, seasonal_naive_forecast};
use crate::ensemble::combine;
use crate::error::{Error, Result};
use crate::pipeline::{FitSeeds, FittedPipeline, PipelineConfig, ValidationScores};
use crate::timeseries::{split_expanding, Dataset, Fold, TargetTransform};

pub const THREADS_ENV: &str = "GRIDCAST_THREADS";
pub const DEFAULT_ABLATION_ALPHAS: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Kan,
    Gbt,
    Hybrid,
    Naive,
    SeasonalNaive,
    LinearArx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Kan,
        ModelKind::Gbt,
        ModelKind::Hybrid,
        ModelKind::Naive,
        ModelKind::SeasonalNaive,
        ModelKind::LinearArx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Kan => "kan",
            ModelKind::Gbt => "gbt",
            ModelKind::Hybrid => "hybrid",
            ModelKind::Naive => "naive",
            ModelKind::SeasonalNaive => "seasonal_naive",
            ModelKind::LinearArx => "linear_arx",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::config("models", format!("unknown model `{s}`")))
    }
}

/// Everything a backtest run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub pipeline: PipelineConfig,
    pub n_folds: usize,
    pub fold_len: usize,
    pub evt_q: f64,
    pub ablation_alphas: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub seed: u64,
}

impl Default for BacktestPlan {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            n_folds: 4,
            fold_len: 168,
            evt_q: 0.95,
            ablation_alphas: DEFAULT_ABLATION_ALPHAS.to_vec(),
            models: ModelKind::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl BacktestPlan {
    pub fn config_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    fn min_train(&self) -> usize {
        let f = &self.pipeline.features;
        f.lookback + 2 * f.horizon + 1
    }
}

/// Raw outcome of one fold; forecasts are in price space and cover every model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: Fold,
    pub alpha: f64,
    pub validation: ValidationScores,
    pub parameter_hash: String,
    pub kan_steps: usize,
    pub actual: Vec<f64>,
    pub forecasts: BTreeMap<ModelKind, Vec<f64>>,
    /// KAN and GBT forecasts in the transformed target space, for re-weighting.
    pub kan_transformed: Vec<f64>,
    pub gbt_transformed: Vec<f64>,
}

/// Fits one fold on `fold.train` and forecasts its test block from the last training hour.
pub fn run_fold(ds: &Dataset, fold: &Fold, plan: &BacktestPlan) -> Result<FoldResult> {
    let horizon = plan.pipeline.features.horizon;
    let len = fold.test.len();
    if len > horizon
        || fold.test.start == 0
        || fold.test.end > ds.len()
        || fold.train.end != fold.test.start
    {
        return Err(Error::InvalidArgument(format!(
            "fold {} does not fit a single {horizon}-hour forecast",
            fold.index
        )));
    }
    let pipe = FittedPipeline::fit(
        ds,
        fold.train.end,
        &plan.pipeline,
        FitSeeds::for_fold(plan.seed, fold.index),
    )?;
    let anchor = fold.test.start - 1;
    let fc = pipe.forecast(ds, anchor)?;
    let history = &ds.price().values()[..fold.test.start];
    let cut = |v: Vec<f64>| v[..len].to_vec();

    let mut forecasts = BTreeMap::new();
    forecasts.insert(ModelKind::Kan, cut(fc.to_price(&fc.kan)));
    forecasts.insert(ModelKind::Gbt, cut(fc.to_price(&fc.gbt)));
    forecasts.insert(ModelKind::Hybrid, cut(fc.to_price(&fc.hybrid)));
    forecasts.insert(ModelKind::LinearArx, cut(fc.to_price(&fc.linear_arx)));
    forecasts.insert(ModelKind::Naive, naive_forecast(history, len)?);
    forecasts.insert(
        ModelKind::SeasonalNaive,
        seasonal_naive_forecast(history, len)?,
    );

    Ok(FoldResult {
        fold: fold.clone(),
        alpha: pipe.alpha(),
        validation: pipe.manifest.validation,
        parameter_hash: pipe.parameter_hash()?,
        kan_steps: pipe.manifest.kan_trace.steps.len(),
        actual: ds.price().values()[fold.test.clone()].to_vec(),
        forecasts,
        kan_transformed: cut(fc.kan),
        gbt_transformed: cut(fc.gbt),
    })
}

/// Pooled forecasts needed to re-score the hybrid at fixed weights.
#[derive(Debug, Clone, Copy)]
pub struct AblationInputs<'a> {
    pub kan: &'a [f64],
    pub gbt: &'a [f64],
    pub actual: &'a [f64],
    pub naive_mae: f64,
    pub transform: TargetTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha_kan: f64,
    pub alpha_gbt: f64,
    pub metrics: MetricSet,
}

/// Pooled test metrics of the hybrid at each fixed weight, sorted by MAE.
pub fn run_weight_ablation(
    inputs: &AblationInputs<'_>,
    alphas: &[f64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let blended = combine(inputs.kan, inputs.gbt, alpha)?;
        let price: Vec<f64> = blended
            .iter()
            .map(|&u| inputs.transform.inverse(u))
            .collect();
        rows.push(AblationRow {
            alpha_kan: alpha,
            alpha_gbt: 1.0 - alpha,
            metrics: MetricSet::compute(&price, inputs.actual, inputs.naive_mae)?,
        });
    }
    rows.sort_by(|a, b| {
        a.metrics
            .mae
            .total_cmp(&b.metrics.mae)
            .then(a.alpha_kan.total_cmp(&b.alpha_kan))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub region: String,
    pub config_hash: String,
    pub seed: u64,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub n_hours: usize,
    pub n_folds: usize,
    pub fold_len: usize,
    pub linear_arx_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_start: NaiveDateTime,
    pub test_end: NaiveDateTime,
    pub train_hours: usize,
    pub alpha: f64,
    /// Validation-week MAE in the transformed target space.
    pub validation: ValidationScores,
    pub parameter_hash: String,
    pub kan_steps: usize,
    pub metrics: BTreeMap<ModelKind, MetricSet>,
    pub actual: Vec<f64>,
    pub forecasts: BTreeMap<ModelKind, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub metadata: ReportMetadata,
    pub models: Vec<ModelKind>,
    pub folds: Vec<FoldReport>,
    /// Metrics over the concatenated test errors of all folds.
    pub pooled: BTreeMap<ModelKind, MetricSet>,
    pub extremes: BTreeMap<ModelKind, ExtremeReport>,
    pub ablation: Vec<AblationRow>,
}

/// Rayon pool sized by `GRIDCAST_THREADS` when set, otherwise by the machine.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::config(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn validate_plan(plan: &BacktestPlan) -> Result<()> {
    plan.pipeline.features.validate()?;
    if plan.fold_len == 0 || plan.fold_len > plan.pipeline.features.horizon {
        return Err(Error::config(
            "backtest.fold_len",
            "must be between 1 and the forecast horizon",
        ));
    }
    if plan.n_folds == 0 {
        return Err(Error::config("backtest.n_folds", "must be positive"));
    }
    if !(plan.evt_q > 0.0 && plan.evt_q < 1.0) {
        return Err(Error::config("metrics.evt_q", "must be in (0, 1)"));
    }
    if plan.models.is_empty() {
        return Err(Error::config("models", "must list at least one model"));
    }
    Ok(())
}

/// Runs every fold (concurrently on the current rayon pool) and assembles the report.
pub fn run_backtest(ds: &Dataset, plan: &BacktestPlan) -> Result<BacktestReport> {
    validate_plan(plan)?;
    let folds = split_expanding(ds.len(), plan.n_folds, plan.fold_len, plan.min_train())?;
    let results: Vec<FoldResult> = folds
        .par_iter()
        .map(|f| run_fold(ds, f, plan).map_err(|e| e.in_fold(f.index)))
        .collect::<Result<_>>()?;
    assemble(ds, plan, &results)
}

fn pooled(results: &[FoldResult], pick: impl Fn(&FoldResult) -> &[f64]) -> Vec<f64> {
    results
        .iter()
        .flat_map(|r| pick(r).iter().copied())
        .collect()
}

fn assemble(ds: &Dataset, plan: &BacktestPlan, results: &[FoldResult]) -> Result<BacktestReport> {
    let mut models = plan.models.clone();
    models.sort();
    models.dedup();

    let mut folds = Vec::with_capacity(results.len());
    for r in results {
        let naive_mae = mae(&r.forecasts[&ModelKind::Naive], &r.actual)?;
        let mut metrics = BTreeMap::new();
        let mut forecasts = BTreeMap::new();
        for &m in &models {
            metrics.insert(
                m,
                MetricSet::compute(&r.forecasts[&m], &r.actual, naive_mae)?,
            );
            forecasts.insert(m, r.forecasts[&m].clone());
        }
        folds.push(FoldReport {
            fold: r.fold.index,
            test_start: ds.timestamp(r.fold.test.start),
            test_end: ds.timestamp(r.fold.test.end - 1),
            train_hours: r.fold.train.len(),
            alpha: r.alpha,
            validation: r.validation,
            parameter_hash: r.parameter_hash.clone(),
            kan_steps: r.kan_steps,
            metrics,
            actual: r.actual.clone(),
            forecasts,
        });
    }

    let actual = pooled(results, |r| &r.actual);
    let naive_mae = mae(
        &pooled(results, |r| &r.forecasts[&ModelKind::Naive]),
        &actual,
    )?;
    let mut pooled_metrics = BTreeMap::new();
    let mut extremes = BTreeMap::new();
    for &m in &models {
        let pred = pooled(results, |r| &r.forecasts[&m]);
        pooled_metrics.insert(m, MetricSet::compute(&pred, &actual, naive_mae)?);
        extremes.insert(m, evt_extreme_mae(&pred, &actual, plan.evt_q)?);
    }

    let ablation = if models.contains(&ModelKind::Hybrid) {
        let kan = pooled(results, |r| &r.kan_transformed);
        let gbt = pooled(results, |r| &r.gbt_transformed);
        let inputs = AblationInputs {
            kan: &kan,
            gbt: &gbt,
            actual: &actual,
            naive_mae,
            transform: plan.pipeline.transform,
        };
        run_weight_ablation(&inputs, &plan.ablation_alphas)?
    } else {
        Vec::new()
    };

    Ok(BacktestReport {
        metadata: ReportMetadata {
            region: ds.region().to_string(),
            config_hash: plan.config_hash()?,
            seed: plan.seed,
            start: ds.start(),
            end: ds.timestamp(ds.len() - 1),
            n_hours: ds.len(),
            n_folds: plan.n_folds,
            fold_len: plan.fold_len,
            linear_arx_note:
                "linear_arx is a least-squares autoregression with exogenous lags, not SARIMAX"
                    .into(),
        },
        models,
        folds,
        pooled: pooled_metrics,
        extremes,
        ablation,
    })
}
