//! Pipeline configuration: JSON schema, defaults, per-model hyperparameter
//! overrides, and the canonical config hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::PhaseSegmentation;
use crate::model::{
    GbrParams, GprParams, KnnParams, MlpParams, ModelKind, ModelParams, RfParams, XgbParams,
};
use crate::preprocess::SplitRatios;

/// Thermocouple clamp bounds, deg C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampBounds {
    pub lo_c: f64,
    pub hi_c: f64,
}

impl Default for ClampBounds {
    fn default() -> Self {
        ClampBounds {
            lo_c: -50.0,
            hi_c: 50.0,
        }
    }
}

/// How rows are assigned to train/test/val.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Shuffled,
    Chronological,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(SplitMode::Shuffled),
            "chronological" => Ok(SplitMode::Chronological),
            other => Err(Error::Parameter(format!("unknown split mode `{other}`"))),
        }
    }
}

fn default_ma_window() -> usize {
    10
}

fn default_seed() -> u64 {
    42
}

fn default_models() -> BTreeMap<String, serde_json::Value> {
    ModelKind::ALL
        .iter()
        .map(|k| (k.as_str().to_string(), serde_json::json!({})))
        .collect()
}

/// Full configuration of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Dataset name to its input CSV files; multiple files are merged after
    /// segmentation (e.g. `"B4C4": ["b4.csv", "c4.csv"]`).
    pub datasets: BTreeMap<String, Vec<PathBuf>>,
    pub segmentation: PhaseSegmentation,
    #[serde(default)]
    pub clamp: ClampBounds,
    #[serde(default = "default_ma_window")]
    pub ma_window: usize,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Model kind to hyperparameter overrides (`{}` keeps the defaults).
    /// When absent, all six model kinds run with their defaults.
    #[serde(default = "default_models")]
    pub models: BTreeMap<String, serde_json::Value>,
    pub out_dir: PathBuf,
    /// Optional per-model lists of hyperparameter values to sweep.
    #[serde(default)]
    pub sweep: BTreeMap<String, BTreeMap<String, Vec<serde_json::Value>>>,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_slice(&bytes)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Parameter("no datasets configured".into()));
        }
        for (name, files) in &self.datasets {
            if files.is_empty() {
                return Err(Error::Parameter(format!(
                    "dataset `{name}` lists no input files"
                )));
            }
            for f in files {
                if !f.exists() {
                    return Err(Error::Parameter(format!(
                        "dataset `{name}`: input file `{}` does not exist",
                        f.display()
                    )));
                }
            }
        }
        PhaseSegmentation::new(self.segmentation.burn_start_s, self.segmentation.burn_end_s)?;
        if !(self.clamp.lo_c < self.clamp.hi_c) {
            return Err(Error::Parameter(format!(
                "clamp bounds must satisfy lo < hi, got ({}, {})",
                self.clamp.lo_c, self.clamp.hi_c
            )));
        }
        if self.ma_window == 0 {
            return Err(Error::Parameter("ma_window must be >= 1".into()));
        }
        self.split.validate()?;
        for (kind, overrides) in &self.models {
            let kind: ModelKind = kind.parse()?;
            resolve_params(kind, overrides)?;
        }
        for kind in self.sweep.keys() {
            let kind: ModelKind = kind.parse()?;
            if !self.models.contains_key(kind.as_str()) {
                return Err(Error::Parameter(format!(
                    "sweep lists `{kind}` but it is not in `models`"
                )));
            }
        }
        Ok(())
    }

    /// The configured models with overrides applied over the defaults.
    pub fn resolved_models(&self) -> Result<BTreeMap<ModelKind, ModelParams>> {
        let mut out = BTreeMap::new();
        for (kind, overrides) in &self.models {
            let kind: ModelKind = kind.parse()?;
            out.insert(kind, resolve_params(kind, overrides)?);
        }
        Ok(out)
    }

    /// SHA-256 of the canonical JSON serialization. Changes exactly when a
    /// configuration field changes.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn inner_default(kind: ModelKind) -> serde_json::Value {
    match kind {
        ModelKind::Knn => serde_json::to_value(KnnParams::default()),
        ModelKind::Rf => serde_json::to_value(RfParams::default()),
        ModelKind::Gbr => serde_json::to_value(GbrParams::default()),
        ModelKind::Xgb => serde_json::to_value(XgbParams::default()),
        ModelKind::Gpr => serde_json::to_value(GprParams::default()),
        ModelKind::Mlp => serde_json::to_value(MlpParams::default()),
    }
    .expect("defaults serialize")
}

fn params_from_inner(kind: ModelKind, value: serde_json::Value) -> Result<ModelParams> {
    Ok(match kind {
        ModelKind::Knn => ModelParams::Knn(serde_json::from_value(value)?),
        ModelKind::Rf => ModelParams::Rf(serde_json::from_value(value)?),
        ModelKind::Gbr => ModelParams::Gbr(serde_json::from_value(value)?),
        ModelKind::Xgb => ModelParams::Xgb(serde_json::from_value(value)?),
        ModelKind::Gpr => ModelParams::Gpr(serde_json::from_value(value)?),
        ModelKind::Mlp => ModelParams::Mlp(serde_json::from_value(value)?),
    })
}

/// Overlay a flat JSON object of overrides onto the default hyperparameters
/// of one model kind. Unknown keys are rejected by name.
pub fn resolve_params(kind: ModelKind, overrides: &serde_json::Value) -> Result<ModelParams> {
    let mut base = inner_default(kind);
    let serde_json::Value::Object(obj) = overrides else {
        return Err(Error::Parameter(format!(
            "hyperparameters for `{kind}` must be a JSON object"
        )));
    };
    let target = base.as_object_mut().expect("defaults are an object");
    for (key, value) in obj {
        if !target.contains_key(key) {
            return Err(Error::Parameter(format!(
                "unknown hyperparameter `{key}` for model `{kind}`"
            )));
        }
        target.insert(key.clone(), value.clone());
    }
    params_from_inner(kind, base)
}
