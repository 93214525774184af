//! Fits the full hybrid forecaster on a training prefix of a dataset.
//!
//! The last `H` hours of the prefix are held out as the validation week: the
//! KAN early-stops on it and the ensemble weight is chosen on it. Neither model
//! is refit on those hours afterwards.

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::LinearArx;
use crate::ensemble::{combine, select_alpha, AlphaSelection};
use crate::error::{Error, Result};
use crate::gbt::{GbtConfig, MultiBooster};
use crate::kan::{self, GridSpec, KanNetwork, Samples, TrainConfig, TrainTrace};
use crate::timeseries::{Dataset, FeatureSpec, ScalerParams, TargetTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KanSettings {
    pub hidden: Vec<usize>,
    pub grid: GridSpec,
    pub train: TrainConfig,
}

impl Default for KanSettings {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            grid: GridSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Everything needed to fit one hybrid model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureSpec,
    pub transform: TargetTransform,
    pub kan: KanSettings,
    pub gbt: GbtConfig,
    pub grid_step: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureSpec::default(),
            transform: TargetTransform::Asinh,
            kan: KanSettings::default(),
            gbt: GbtConfig::default(),
            grid_step: 0.05,
        }
    }
}

/// Seeds for one fit; see [`derive_seed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitSeeds {
    pub kan: u64,
    pub gbt: u64,
}

impl FitSeeds {
    pub fn for_fold(run_seed: u64, fold: usize) -> Self {
        Self {
            kan: derive_seed(run_seed, fold as u64, 0),
            gbt: derive_seed(run_seed, fold as u64, 1),
        }
    }
}

/// SplitMix64 mix of (seed, fold, stream).
pub fn derive_seed(seed: u64, fold: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(fold.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Validation-week MAE (transformed target space) of each model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationScores {
    pub kan: f64,
    pub gbt: f64,
    pub hybrid: f64,
}

/// One forecast from every learned model, in transformed space and price space.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineForecast {
    pub anchor: usize,
    pub kan: Vec<f64>,
    pub gbt: Vec<f64>,
    pub hybrid: Vec<f64>,
    pub linear_arx: Vec<f64>,
    pub transform: TargetTransform,
}

impl PipelineForecast {
    pub fn to_price(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&u| self.transform.inverse(u)).collect()
    }
}

/// Metadata and small components of a fitted pipeline; the two learned models are
/// stored next to it as their own documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub region: String,
    pub trained_through: chrono::NaiveDateTime,
    pub features: FeatureSpec,
    pub transform: TargetTransform,
    pub scaler: ScalerParams,
    pub alpha: AlphaSelection,
    pub validation: ValidationScores,
    pub linear_arx: LinearArx,
    pub kan_trace: TrainTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub manifest: PipelineManifest,
    pub kan: KanNetwork,
    pub gbt: MultiBooster,
}

pub const MANIFEST_FILE: &str = "pipeline.json";
pub const KAN_FILE: &str = "kan.json";
pub const GBT_FILE: &str = "gbt.json";

/// Anchors whose targets end before the validation week, and the validation anchor.
fn training_anchors(spec: &FeatureSpec, train_end: usize) -> Result<(Vec<usize>, usize)> {
    let h = spec.horizon;
    let l = spec.lookback;
    let needed = l + 2 * h + 1;
    if train_end < needed {
        return Err(Error::TooShort {
            needed,
            available: train_end,
        });
    }
    let val_start = train_end - h;
    let anchors = (l - 1..val_start - h).collect();
    Ok((anchors, val_start - 1))
}

fn column_means(y: &Array2<f64>) -> Vec<f64> {
    y.mean_axis(Axis(0)).expect("non-empty").to_vec()
}

impl FittedPipeline {
    /// Fits on hours `0..train_end` of `ds`; later hours are never read.
    pub fn fit(
        ds: &Dataset,
        train_end: usize,
        cfg: &PipelineConfig,
        seeds: FitSeeds,
    ) -> Result<Self> {
        if train_end > ds.len() {
            return Err(Error::TooShort {
                needed: train_end,
                available: ds.len(),
            });
        }
        let spec = &cfg.features;
        spec.validate()?;
        let ds = ds.truncated(train_end);
        let tds = ds.map_price(|v| cfg.transform.forward(v))?;
        let (anchors, val_anchor) = training_anchors(spec, train_end)?;
        let d = spec.dim(&tds)?;
        if anchors.len() < d + 2 {
            return Err(Error::TooShort {
                needed: spec.lookback + 2 * spec.horizon + d + 2,
                available: train_end,
            });
        }

        let raw = spec.feature_matrix(&tds, &anchors)?;
        let scaler = ScalerParams::fit_matrix(raw.view())?;
        let x = scaler.apply_matrix(raw.view())?;
        let y = spec.target_matrix(&tds, &anchors)?;
        let val_x = scaler.apply_matrix(spec.feature_matrix(&tds, &[val_anchor])?.view())?;
        let val_y = spec.target_matrix(&tds, &[val_anchor])?;

        let mut dims = vec![d];
        dims.extend(&cfg.kan.hidden);
        dims.push(spec.horizon);
        let mut net = KanNetwork::new(&dims, cfg.kan.grid, seeds.kan)?;
        net.set_output_bias(&column_means(&y))?;
        let train_set = Samples::new(x.clone(), y.clone())?;
        let val_set = Samples::new(val_x.clone(), val_y.clone())?;
        let (net, trace) = kan::train(net, &train_set, &val_set, &cfg.kan.train)?;

        let gbt_cfg = GbtConfig {
            seed: seeds.gbt,
            ..cfg.gbt
        };
        let gbt = MultiBooster::fit(x.view(), y.view(), &gbt_cfg)?;
        let linear_arx = LinearArx::fit(x.view(), y.view())?;

        let val_row = val_x.row(0).to_vec();
        let kan_val = net.forward(&val_row)?;
        let gbt_val = gbt.predict_multi(&val_row)?;
        let alpha = select_alpha(
            &kan_val,
            &gbt_val,
            val_y.row(0).as_slice().expect("row"),
            cfg.grid_step,
        )?;
        let validation = ValidationScores {
            kan: alpha.loss_at(1.0).expect("grid holds 1"),
            gbt: alpha.loss_at(0.0).expect("grid holds 0"),
            hybrid: alpha.loss_at(alpha.alpha()).expect("grid holds alpha"),
        };

        Ok(Self {
            manifest: PipelineManifest {
                region: ds.region().to_string(),
                trained_through: ds.timestamp(train_end - 1),
                features: spec.clone(),
                transform: cfg.transform,
                scaler,
                alpha,
                validation,
                linear_arx,
                kan_trace: trace,
            },
            kan: net,
            gbt,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.manifest.alpha.alpha()
    }

    /// Scaled feature vector at `anchor`.
    pub fn features(&self, ds: &Dataset, anchor: usize) -> Result<Vec<f64>> {
        let m = &self.manifest;
        let tds = ds
            .truncated(anchor + 1)
            .map_price(|v| m.transform.forward(v))?;
        let raw = m.features.features_at(&tds, anchor)?;
        m.scaler.apply(&raw)
    }

    /// Forecast of hours `anchor+1 ..= anchor+H` from data up to `anchor`.
    pub fn forecast(&self, ds: &Dataset, anchor: usize) -> Result<PipelineForecast> {
        let x = self.features(ds, anchor)?;
        let kan = self.kan.forward(&x)?;
        let gbt = self.gbt.predict_multi(&x)?;
        let hybrid = combine(&kan, &gbt, self.alpha())?;
        let linear_arx = self.manifest.linear_arx.predict(&x)?;
        Ok(PipelineForecast {
            anchor,
            kan,
            gbt,
            hybrid,
            linear_arx,
            transform: self.manifest.transform,
        })
    }

    /// SHA-256 over every fitted parameter and the selected weight.
    pub fn parameter_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.manifest.scaler)?);
        h.update(serde_json::to_vec(&self.kan)?);
        h.update(serde_json::to_vec(&self.gbt)?);
        h.update(serde_json::to_vec(&self.manifest.linear_arx)?);
        h.update(self.alpha().to_le_bytes());
        Ok(hex::encode(h.finalize()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&self.manifest)?,
        )?;
        std::fs::write(dir.join(KAN_FILE), self.kan.to_json()?)?;
        std::fs::write(dir.join(GBT_FILE), self.gbt.to_json()?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: PipelineManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let kan = KanNetwork::from_json(&std::fs::read_to_string(dir.join(KAN_FILE))?)?;
        let gbt = MultiBooster::from_json(&std::fs::read_to_string(dir.join(GBT_FILE))?)?;
        let d = manifest.scaler.dim();
        if kan.in_dim() != d || gbt.boosters.iter().any(|b| b.n_features != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: kan.in_dim(),
            });
        }
        if kan.out_dim() != manifest.features.horizon || gbt.horizon() != manifest.features.horizon
        {
            return Err(Error::DimensionMismatch {
                expected: manifest.features.horizon,
                actual: kan.out_dim(),
            });
        }
        Ok(Self { manifest, kan, gbt })
    }
}
