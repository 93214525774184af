//! JSON run configuration covering data, features, models and evaluation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{BacktestPlan, ModelKind, DEFAULT_ABLATION_ALPHAS};
use crate::gbt::GbtConfig;
use crate::kan::SplineGrid;
use crate::pipeline::{KanSettings, PipelineConfig};
use crate::synth::{self, SynthConfig};
use crate::timeseries::{ingest_csv, Dataset, FeatureSpec, Schema, TargetTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Schema,
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv(CsvSource),
    Synth(SynthConfig),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub grid_step: f64,
    pub ablation_alphas: Vec<f64>,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            ablation_alphas: DEFAULT_ABLATION_ALPHAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSettings {
    pub n_folds: usize,
    pub fold_len: usize,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        Self {
            n_folds: 4,
            fold_len: 168,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub evt_q: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self { evt_q: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub features: FeatureSpec,
    pub target_transform: TargetTransform,
    pub kan: KanSettings,
    pub gbt: GbtConfig,
    pub ensemble: EnsembleSettings,
    pub backtest: BacktestSettings,
    pub metrics: MetricSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub models: Vec<ModelKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            features: FeatureSpec::default(),
            target_transform: TargetTransform::default(),
            kan: KanSettings::default(),
            gbt: GbtConfig::default(),
            ensemble: EnsembleSettings::default(),
            backtest: BacktestSettings::default(),
            metrics: MetricSettings::default(),
            output_dir: PathBuf::from("out"),
            seed: 42,
            models: ModelKind::ALL.to_vec(),
        }
    }
}

impl RunConfig {
    /// Parses and validates; errors carry the offending field path.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative CSV path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json_str(&text)?;
        if let DataSource::Csv(src) = &mut cfg.data {
            if src.path.is_relative() {
                if let Some(dir) = path.parent() {
                    src.path = dir.join(&src.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::Synth(s) => s.validate("data.synth")?,
            DataSource::Csv(c) => {
                if c.region.trim().is_empty() {
                    return Err(Error::config("data.csv.region", "must not be empty"));
                }
            }
        }
        self.features.validate()?;
        if self.kan.hidden.contains(&0) {
            return Err(Error::config("kan.hidden", "layer widths must be positive"));
        }
        let g = &self.kan.grid;
        SplineGrid::new(g.lo, g.hi, g.grid_size, g.order)
            .map_err(|e| Error::config("kan.grid", e.to_string()))?;
        if g.order > 15 {
            return Err(Error::config("kan.grid.order", "must be at most 15"));
        }
        self.kan.train.validate("kan.train")?;
        self.gbt.validate("gbt")?;
        let step = self.ensemble.grid_step;
        let n = (1.0 / step).round();
        if !(step > 0.0 && step <= 1.0) || (n * step - 1.0).abs() > 1e-9 {
            return Err(Error::config("ensemble.grid_step", "must divide 1 evenly"));
        }
        if self
            .ensemble
            .ablation_alphas
            .iter()
            .any(|a| !(0.0..=1.0).contains(a))
        {
            return Err(Error::config(
                "ensemble.ablation_alphas",
                "weights must lie in [0, 1]",
            ));
        }
        if self.backtest.n_folds == 0 {
            return Err(Error::config("backtest.n_folds", "must be positive"));
        }
        if self.backtest.fold_len == 0 || self.backtest.fold_len > self.features.horizon {
            return Err(Error::config(
                "backtest.fold_len",
                "must be between 1 and features.horizon",
            ));
        }
        if !(self.metrics.evt_q > 0.0 && self.metrics.evt_q < 1.0) {
            return Err(Error::config("metrics.evt_q", "must be in (0, 1)"));
        }
        if self.models.is_empty() {
            return Err(Error::config("models", "must list at least one model"));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            features: self.features.clone(),
            transform: self.target_transform,
            kan: self.kan.clone(),
            gbt: self.gbt,
            grid_step: self.ensemble.grid_step,
        }
    }

    pub fn plan(&self) -> BacktestPlan {
        BacktestPlan {
            pipeline: self.pipeline(),
            n_folds: self.backtest.n_folds,
            fold_len: self.backtest.fold_len,
            evt_q: self.metrics.evt_q,
            ablation_alphas: self.ensemble.ablation_alphas.clone(),
            models: self.models.clone(),
            seed: self.seed,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synth(s) => synth::generate(s),
            DataSource::Csv(c) => ingest_csv(&c.path, &c.schema, &c.region),
        }
    }
}
