//! Predictor-table assembly, standardization, and train/test/validation
//! splitting.
//!
//! The predictor layout is fixed: `[T1..T7, sonic_T]` paired with the moving
//! average of TKE as the target.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ClusterDataset;
use crate::linalg::Matrix;
use crate::seed::{derive_seed, derive_seed_indexed, rng_from};
use crate::turbulence::TurbulenceSeries;

/// Number of predictor columns.
pub const N_FEATURES: usize = 8;

/// Predictor column names in table order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "T1_C", "T2_C", "T3_C", "T4_C", "T5_C", "T6_C", "T7_C", "sonic_T_C",
];

/// Split membership of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Test,
    Val,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Test => "test",
            SplitLabel::Val => "val",
        }
    }

    pub const ALL: [SplitLabel; 3] = [SplitLabel::Train, SplitLabel::Test, SplitLabel::Val];
}

impl std::fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// N x 8 predictor matrix with paired targets and split labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub x: Matrix,
    /// TKE_MA targets, m^2/s^2.
    pub y: Vec<f64>,
    pub time_s: Vec<f64>,
    pub split: Vec<SplitLabel>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Row indices belonging to one split, in row order.
    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == label).collect()
    }

    /// Targets of one split, in row order.
    pub fn targets(&self, label: SplitLabel) -> Vec<f64> {
        self.indices(label).iter().map(|&i| self.y[i]).collect()
    }
}

/// Column means and population standard deviations fitted on train rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fractions for the train/test/val partition. Must sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub val: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.64,
            test: 0.16,
            val: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.val];
        if parts.iter().any(|&p| p <= 0.0 || p >= 1.0) {
            return Err(Error::Parameter(format!(
                "split fractions must lie strictly inside (0, 1), got {self:?}"
            )));
        }
        let sum = self.train + self.test + self.val;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Pair `[T1..T7, sonic_T]` rows with the `tke_ma` target at the same
/// timestamps.
pub fn assemble(ds: &ClusterDataset, turb: &TurbulenceSeries) -> Result<FeatureTable> {
    if ds.len() != turb.tke_ma.len() || ds.len() != turb.time_s.len() {
        return Err(Error::Alignment(format!(
            "dataset has {} records, turbulence series has {}",
            ds.len(),
            turb.tke_ma.len()
        )));
    }
    for (r, &t) in ds.records.iter().zip(&turb.time_s) {
        if r.time_s != t {
            return Err(Error::Alignment(format!(
                "timestamp mismatch at t = {} vs {}",
                r.time_s, t
            )));
        }
    }
    let mut data = Vec::with_capacity(ds.len() * N_FEATURES);
    for r in &ds.records {
        if !r.t_c.iter().all(|v| v.is_finite()) || !r.sonic_t_c.is_finite() {
            return Err(Error::Parameter(format!(
                "non-finite predictor at t = {}",
                r.time_s
            )));
        }
        data.extend_from_slice(&r.t_c);
        data.push(r.sonic_t_c);
    }
    if turb.tke_ma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite target value".into()));
    }
    let n = ds.len();
    Ok(FeatureTable {
        x: Matrix::from_vec(n, N_FEATURES, data)?,
        y: turb.tke_ma.clone(),
        time_s: turb.time_s.clone(),
        split: vec![SplitLabel::Train; n],
    })
}

/// Fit the standardizer on train rows only (population standard deviation).
pub fn fit_scaler(table: &FeatureTable) -> Result<ScalerState> {
    let train = table.indices(SplitLabel::Train);
    if train.len() < 2 {
        return Err(Error::InsufficientData {
            got: train.len(),
            need: 2,
        });
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; N_FEATURES];
    for &i in &train {
        for (j, v) in table.x.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; N_FEATURES];
    for &i in &train {
        for (j, v) in table.x.row(i).iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    let mut std = vec![0.0; N_FEATURES];
    for j in 0..N_FEATURES {
        std[j] = (var[j] / n).sqrt();
        if std[j] == 0.0 {
            return Err(Error::DegenerateVariance(FEATURE_NAMES[j].to_string()));
        }
    }
    Ok(ScalerState { mean, std })
}

/// Columnwise `(x - mean) / std` over all rows.
pub fn transform(x: &Matrix, s: &ScalerState) -> Result<Matrix> {
    if x.cols() != s.mean.len() {
        return Err(Error::Shape(format!(
            "matrix has {} columns, scaler expects {}",
            x.cols(),
            s.mean.len()
        )));
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for j in 0..row.len() {
            row[j] = (row[j] - s.mean[j]) / s.std[j];
        }
    }
    Ok(out)
}

/// Inverse of [`transform`].
pub fn inverse_transform(x: &Matrix, s: &ScalerState) -> Result<Matrix> {
    if x.cols() != s.mean.len() {
        return Err(Error::Shape(format!(
            "matrix has {} columns, scaler expects {}",
            x.cols(),
            s.mean.len()
        )));
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for j in 0..row.len() {
            row[j] = row[j] * s.std[j] + s.mean[j];
        }
    }
    Ok(out)
}

/// Row counts for each split under the nesting used here: the validation
/// share is carved off the shuffle first, then the remainder is split
/// between train and test.
pub fn split_counts(n: usize, ratios: &SplitRatios) -> (usize, usize, usize) {
    let n_val = (n as f64 * ratios.val).round() as usize;
    let rem = n - n_val;
    let test_share = ratios.test / (ratios.train + ratios.test);
    let n_test = (rem as f64 * test_share).round() as usize;
    let n_train = rem - n_test;
    (n_train, n_test, n_val)
}

/// Assign split labels by a seeded uniform shuffle: first the validation
/// block, then train and test from the remainder. Deterministic per seed.
pub fn assign_random_split(
    table: &mut FeatureTable,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<()> {
    ratios.validate()?;
    let n = table.len();
    if n < 10 {
        return Err(Error::InsufficientData { got: n, need: 10 });
    }
    let (n_train, n_test, n_val) = split_counts(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, "split")));
    for (pos, &row) in order.iter().enumerate() {
        table.split[row] = if pos < n_val {
            SplitLabel::Val
        } else if pos < n_val + n_train {
            SplitLabel::Train
        } else {
            SplitLabel::Test
        };
    }
    debug_assert_eq!(table.indices(SplitLabel::Test).len(), n_test);
    Ok(())
}

/// Time-ordered alternative: train rows first, then test, then validation at
/// the end of the series. For leakage-aware studies; not the default.
pub fn assign_chronological_split(table: &mut FeatureTable, ratios: &SplitRatios) -> Result<()> {
    ratios.validate()?;
    let n = table.len();
    if n < 10 {
        return Err(Error::InsufficientData { got: n, need: 10 });
    }
    let (n_train, n_test, _) = split_counts(n, ratios);
    for i in 0..n {
        table.split[i] = if i < n_train {
            SplitLabel::Train
        } else if i < n_train + n_test {
            SplitLabel::Test
        } else {
            SplitLabel::Val
        };
    }
    Ok(())
}

/// `k` independent seeded random partitions of `0..n` into a train part of
/// `round(n * train_frac)` rows and its complement.
pub fn shuffle_split_cv(
    n: usize,
    k: usize,
    train_frac: f64,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k == 0 {
        return Err(Error::Parameter("fold count must be >= 1".into()));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData { got: n, need: 2 });
    }
    let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from(derive_seed_indexed(seed, "cv", fold as u64)));
        let mut train = order[..n_train].to_vec();
        let mut eval = order[n_train..].to_vec();
        train.sort_unstable();
        eval.sort_unstable();
        folds.push((train, eval));
    }
    Ok(folds)
}

/// Emit the feature table with split labels, full precision.
pub fn write_features_csv(table: &FeatureTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "time_s,{},tke_ma,split", FEATURE_NAMES.join(","))?;
        for i in 0..table.len() {
            let feats = table
                .x
                .row(i)
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(
                out,
                "{},{},{},{}",
                table.time_s[i], feats, table.y[i], table.split[i]
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
