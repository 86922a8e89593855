//! Six regression models behind one fit/predict contract.
//!
//! Every model trains deterministically from an explicit seed and never
//! reads anything but the rows it is given. Inputs are expected to be
//! standardized feature rows (the pipeline standardizes with train-row
//! statistics); targets stay in physical units.

pub mod forest;
pub mod gbr;
pub mod gpr;
pub mod knn;
pub mod mlp;
pub mod tree;
pub mod xgb;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::N_FEATURES;
use crate::seed::derive_seed;

pub use forest::{RfModel, RfParams};
pub use gbr::{GbrModel, GbrParams};
pub use gpr::{GprModel, GprParams, KernelParams};
pub use knn::{euclidean_distance, KnnModel, KnnParams, Weighting};
pub use mlp::{norm_chain_check, MlpModel, MlpParams, NormChain};
pub use xgb::{leaf_weight, soft_threshold, XgbModel, XgbParams};

/// The model family of a spec or trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Rf,
    Knn,
    Gbr,
    Gpr,
    Xgb,
}

impl ModelKind {
    /// Canonical report order.
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::Rf,
        ModelKind::Knn,
        ModelKind::Gbr,
        ModelKind::Gpr,
        ModelKind::Xgb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Rf => "rf",
            ModelKind::Knn => "knn",
            ModelKind::Gbr => "gbr",
            ModelKind::Gpr => "gpr",
            ModelKind::Xgb => "xgb",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "rf" => Ok(ModelKind::Rf),
            "knn" => Ok(ModelKind::Knn),
            "gbr" => Ok(ModelKind::Gbr),
            "gpr" => Ok(ModelKind::Gpr),
            "xgb" => Ok(ModelKind::Xgb),
            other => Err(Error::Parameter(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Hyperparameters for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelParams {
    Knn(KnnParams),
    Rf(RfParams),
    Gbr(GbrParams),
    Xgb(XgbParams),
    Gpr(GprParams),
    Mlp(MlpParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Gbr(_) => ModelKind::Gbr,
            ModelParams::Xgb(_) => ModelKind::Xgb,
            ModelParams::Gpr(_) => ModelKind::Gpr,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Table defaults for one family.
    pub fn default_for(kind: ModelKind) -> ModelParams {
        match kind {
            ModelKind::Knn => ModelParams::Knn(KnnParams::default()),
            ModelKind::Rf => ModelParams::Rf(RfParams::default()),
            ModelKind::Gbr => ModelParams::Gbr(GbrParams::default()),
            ModelKind::Xgb => ModelParams::Xgb(XgbParams::default()),
            ModelKind::Gpr => ModelParams::Gpr(GprParams::default()),
            ModelKind::Mlp => ModelParams::Mlp(MlpParams::default()),
        }
    }
}

/// A model family, its hyperparameters, and the training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        RegressorSpec { params, seed }
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    /// Check counts, rates and regularization weights.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match &self.params {
            ModelParams::Knn(p) => {
                if p.neighbors == 0 {
                    return bad("knn neighbors must be >= 1".into());
                }
            }
            ModelParams::Rf(p) => {
                if p.estimators == 0 {
                    return bad("rf estimators must be >= 1".into());
                }
                if p.min_split < 2 {
                    return bad("rf min_split must be >= 2".into());
                }
                if p.max_features == Some(0) {
                    return bad("rf max_features must be >= 1".into());
                }
            }
            ModelParams::Gbr(p) => {
                if p.estimators == 0 {
                    return bad("gbr estimators must be >= 1".into());
                }
                if !(p.rate > 0.0) {
                    return bad(format!("gbr rate must be > 0, got {}", p.rate));
                }
            }
            ModelParams::Xgb(p) => {
                if p.estimators == 0 {
                    return bad("xgb estimators must be >= 1".into());
                }
                if !(p.learning_rate > 0.0) {
                    return bad(format!(
                        "xgb learning_rate must be > 0, got {}",
                        p.learning_rate
                    ));
                }
                if p.l1 < 0.0 || p.l2 < 0.0 || p.gamma < 0.0 {
                    return bad("xgb regularization weights must be >= 0".into());
                }
            }
            ModelParams::Gpr(p) => {
                if !(p.rbf_length_scale > 0.0 && p.rq_length_scale > 0.0 && p.rq_alpha > 0.0) {
                    return bad("gpr length scales and mixture must be > 0".into());
                }
                if p.white_noise < 0.0 || p.alpha < 0.0 {
                    return bad("gpr noise and jitter must be >= 0".into());
                }
                if p.max_train == 0 || p.opt_subsample == 0 {
                    return bad("gpr row caps must be >= 1".into());
                }
            }
            ModelParams::Mlp(p) => {
                if p.hidden.is_empty() || p.hidden.iter().any(|&h| h == 0) {
                    return bad("mlp hidden widths must be >= 1".into());
                }
                if !(p.learning_rate > 0.0) {
                    return bad(format!(
                        "mlp learning_rate must be > 0, got {}",
                        p.learning_rate
                    ));
                }
                if p.batch == 0 || p.epochs == 0 || p.patience == 0 {
                    return bad("mlp batch, epochs and patience must be >= 1".into());
                }
                if p.l1 < 0.0 {
                    return bad("mlp l1 weight must be >= 0".into());
                }
                if !(p.val_fraction > 0.0 && p.val_fraction < 1.0) {
                    return bad("mlp val_fraction must lie in (0, 1)".into());
                }
            }
        }
        Ok(())
    }
}

/// A trained model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorModel {
    Knn(KnnModel),
    Rf(RfModel),
    Gbr(GbrModel),
    Xgb(XgbModel),
    Gpr(GprModel),
    Mlp(MlpModel),
}

impl RegressorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            RegressorModel::Knn(_) => ModelKind::Knn,
            RegressorModel::Rf(_) => ModelKind::Rf,
            RegressorModel::Gbr(_) => ModelKind::Gbr,
            RegressorModel::Xgb(_) => ModelKind::Xgb,
            RegressorModel::Gpr(_) => ModelKind::Gpr,
            RegressorModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// One finite prediction per row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let preds = match self {
            RegressorModel::Knn(m) => m.predict(x)?,
            RegressorModel::Rf(m) => m.predict(x)?,
            RegressorModel::Gbr(m) => m.predict(x)?,
            RegressorModel::Xgb(m) => m.predict(x)?,
            RegressorModel::Gpr(m) => m.predict(x)?,
            RegressorModel::Mlp(m) => m.predict(x)?,
        };
        if preds.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { step: 0 });
        }
        Ok(preds)
    }
}

/// Train a model on `(x, y)` per the spec. Deterministic for a fixed spec.
pub fn fit(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<RegressorModel> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows vs {} targets",
            x.rows(),
            y.len()
        )));
    }
    match &spec.params {
        ModelParams::Knn(p) => Ok(RegressorModel::Knn(KnnModel::fit(p, x, y)?)),
        ModelParams::Rf(p) => Ok(RegressorModel::Rf(RfModel::fit(p, x, y, spec.seed)?)),
        ModelParams::Gbr(p) => Ok(RegressorModel::Gbr(GbrModel::fit(p, x, y, spec.seed)?)),
        ModelParams::Xgb(p) => Ok(RegressorModel::Xgb(XgbModel::fit(p, x, y)?)),
        ModelParams::Gpr(p) => Ok(RegressorModel::Gpr(GprModel::fit(p, x, y, spec.seed)?)),
        ModelParams::Mlp(p) => {
            // carve an internal early-stopping split off the provided rows;
            // test and validation rows of the pipeline are never seen here
            let n = x.rows();
            if n < 5 {
                return Err(Error::InsufficientData { got: n, need: 5 });
            }
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(
                &mut order[..],
                &mut crate::seed::rng_from(derive_seed(spec.seed, "mlp-holdout")),
            );
            let n_val = ((n as f64 * p.val_fraction).round() as usize).clamp(1, n - 1);
            let (val_idx, train_idx) = order.split_at(n_val);
            let mut train_idx = train_idx.to_vec();
            let mut val_idx = val_idx.to_vec();
            train_idx.sort_unstable();
            val_idx.sort_unstable();
            let tx = x.select_rows(&train_idx);
            let ty: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let vx = x.select_rows(&val_idx);
            let vy: Vec<f64> = val_idx.iter().map(|&i| y[i]).collect();

            let mut model = MlpModel::new(x.cols(), p, spec.seed)?;
            // start the output unit at the train-target mean
            let last = model.layer_count() - 1;
            model.set_bias(last, 0, ty.iter().sum::<f64>() / ty.len() as f64);
            model.train(&tx, &ty, &vx, &vy)?;
            Ok(RegressorModel::Mlp(model))
        }
    }
}

const CONTAINER_MAGIC: &[u8; 8] = b"TKEMODEL";
const CONTAINER_VERSION: u16 = 1;

/// A trained model together with the spec that produced it, as stored in the
/// versioned container format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub spec: RegressorSpec,
    pub model: RegressorModel,
}

/// Write `spec` and `model` to a binary container: an 8-byte magic, a
/// little-endian version, a little-endian payload length, and the payload.
/// The payload encoding is binary, so floats survive bit-exactly.
pub fn save_model(path: &Path, spec: &RegressorSpec, model: &RegressorModel) -> Result<()> {
    let payload = bincode::serialize(&SavedModel {
        spec: spec.clone(),
        model: model.clone(),
    })
    .map_err(|e| Error::Container(e.to_string()))?;
    let mut out = File::create(path).map_err(|e| Error::io(path, e))?;
    let write = |out: &mut File| -> std::io::Result<()> {
        out.write_all(CONTAINER_MAGIC)?;
        out.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        out.write_all(&(payload.len() as u64).to_le_bytes())?;
        out.write_all(&payload)
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Read a model container written by [`save_model`].
pub fn load_model(path: &Path) -> Result<SavedModel> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 18 || &bytes[..8] != CONTAINER_MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != CONTAINER_VERSION {
        return Err(Error::Container(format!(
            "unsupported container version {version}"
        )));
    }
    let len = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    if bytes.len() != 18 + len {
        return Err(Error::Container(format!(
            "payload length {} does not match header {len}",
            bytes.len() - 18
        )));
    }
    bincode::deserialize(&bytes[18..]).map_err(|e| Error::Container(e.to_string()))
}

/// Seed for one (model, dataset) training task, derived from the pipeline
/// seed so parallel training order cannot matter.
pub fn task_seed(base: u64, kind: ModelKind, dataset: &str) -> u64 {
    derive_seed(base, &format!("fit/{}/{dataset}", kind.as_str()))
}

/// Expected feature count for pipeline tables.
pub fn expect_pipeline_features(x: &Matrix) -> Result<()> {
    if x.cols() != N_FEATURES {
        return Err(Error::Shape(format!(
            "pipeline tables carry {N_FEATURES} features, got {}",
            x.cols()
        )));
    }
    Ok(())
}
