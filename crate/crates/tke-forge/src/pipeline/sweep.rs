//! Hyperparameter grid sweep: the Cartesian product of per-model value
//! lists, scored by shuffle-split cross-validation over the train+test rows
//! and ranked by mean validation R^2.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{self, ModelKind, ModelParams, RegressorSpec};
use crate::pipeline::config::resolve_params;
use crate::pipeline::{build_dataset, train_and_evaluate, PipelineConfig, PreparedDataset};
use crate::preprocess::{shuffle_split_cv, SplitLabel};
use crate::seed::derive_seed;
use crate::stats::{mse, r_squared, MetricsReport};

/// Folds of the cross-validation behind sweep scores.
const CV_FOLDS: usize = 5;
const CV_TRAIN_FRAC: f64 = 0.8;

/// One evaluated sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub dataset: String,
    pub kind: ModelKind,
    /// Swept assignment as `key=value` pairs, sorted by key.
    pub assignment: String,
    pub cv_mean_r2: f64,
    pub cv_mean_mse: f64,
    /// Standard-split metrics for this point, computed exactly as `run`
    /// computes them.
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub val: MetricsReport,
}

fn cartesian(
    space: &BTreeMap<String, Vec<serde_json::Value>>,
) -> Vec<BTreeMap<String, serde_json::Value>> {
    let mut points: Vec<BTreeMap<String, serde_json::Value>> = vec![BTreeMap::new()];
    for (key, values) in space {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for v in values {
                let mut q = point.clone();
                q.insert(key.clone(), v.clone());
                next.push(q);
            }
        }
        points = next;
    }
    points
}

fn assignment_label(point: &BTreeMap<String, serde_json::Value>) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn apply_point(
    kind: ModelKind,
    base_overrides: &serde_json::Value,
    point: &BTreeMap<String, serde_json::Value>,
) -> Result<ModelParams> {
    let mut merged = match base_overrides {
        serde_json::Value::Object(o) => o.clone(),
        _ => serde_json::Map::new(),
    };
    for (k, v) in point {
        merged.insert(k.clone(), v.clone());
    }
    resolve_params(kind, &serde_json::Value::Object(merged))
}

/// Cross-validation score of one spec on the pooled train+test rows.
fn cv_score(
    prepared: &PreparedDataset,
    spec: &RegressorSpec,
    cv_seed: u64,
) -> Result<(f64, f64)> {
    let pool_rows: Vec<usize> = (0..prepared.table.len())
        .filter(|&i| prepared.table.split[i] != SplitLabel::Val)
        .collect();
    let folds = shuffle_split_cv(pool_rows.len(), CV_FOLDS, CV_TRAIN_FRAC, cv_seed)?;
    let mut r2_sum = 0.0;
    let mut mse_sum = 0.0;
    for (train, eval) in &folds {
        let train_rows: Vec<usize> = train.iter().map(|&i| pool_rows[i]).collect();
        let eval_rows: Vec<usize> = eval.iter().map(|&i| pool_rows[i]).collect();
        let x_train = prepared.x_scaled.select_rows(&train_rows);
        let y_train: Vec<f64> = train_rows.iter().map(|&i| prepared.table.y[i]).collect();
        let fitted = model::fit(spec, &x_train, &y_train)?;
        let x_eval = prepared.x_scaled.select_rows(&eval_rows);
        let y_eval: Vec<f64> = eval_rows.iter().map(|&i| prepared.table.y[i]).collect();
        let preds = fitted.predict(&x_eval)?;
        r2_sum += r_squared(&y_eval, &preds)?;
        mse_sum += mse(&y_eval, &preds)?;
    }
    Ok((r2_sum / CV_FOLDS as f64, mse_sum / CV_FOLDS as f64))
}

/// Evaluate every sweep point and write `sweep_results.csv` to the output
/// directory. Rows are ranked per dataset by mean validation R^2, with ties
/// broken by lower MSE and then by the lexicographic assignment.
pub fn grid_sweep(cfg: &PipelineConfig) -> Result<Vec<SweepRow>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if cfg.sweep.is_empty() {
        return Err(Error::Parameter("no sweep lists configured".into()).in_stage("config"));
    }
    for (kind, space) in &cfg.sweep {
        if space.is_empty() || space.values().any(|v| v.is_empty()) {
            return Err(
                Error::Parameter(format!("sweep for `{kind}` has an empty value list"))
                    .in_stage("config"),
            );
        }
    }
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(&cfg.out_dir, e).in_stage("config"))?;

    let mut rows = Vec::new();
    for (name, files) in &cfg.datasets {
        let (_, _, prepared) = build_dataset(cfg, name, files)?;
        for (kind_str, space) in &cfg.sweep {
            let kind: ModelKind = kind_str.parse()?;
            let base = cfg
                .models
                .get(kind_str)
                .cloned()
                .unwrap_or_else(|| serde_json::json!({}));
            // reject unknown keys before running anything
            for key in space.keys() {
                let probe: BTreeMap<String, serde_json::Value> =
                    [(key.clone(), space[key][0].clone())].into_iter().collect();
                apply_point(kind, &base, &probe).map_err(|e| e.in_stage("config"))?;
            }
            let points = cartesian(space);
            if points.is_empty() {
                return Err(
                    Error::Parameter(format!("sweep product for `{kind}` is empty"))
                        .in_stage("config"),
                );
            }
            let cv_seed = derive_seed(cfg.seed, &format!("sweep-cv/{name}"));
            for point in &points {
                let params = apply_point(kind, &base, point)?;
                let spec = RegressorSpec::new(
                    params.clone(),
                    model::task_seed(cfg.seed, kind, name),
                );
                let (cv_mean_r2, cv_mean_mse) =
                    cv_score(&prepared, &spec, cv_seed).map_err(|e| e.in_stage("sweep"))?;
                let eval = train_and_evaluate(&prepared, &params, cfg.seed)
                    .map_err(|e| e.in_stage("sweep"))?;
                rows.push(SweepRow {
                    dataset: name.clone(),
                    kind,
                    assignment: assignment_label(point),
                    cv_mean_r2,
                    cv_mean_mse,
                    train: eval.train,
                    test: eval.test,
                    val: eval.val,
                });
            }
        }
    }

    rows.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(b.cv_mean_r2.partial_cmp(&a.cv_mean_r2).unwrap())
            .then(a.cv_mean_mse.partial_cmp(&b.cv_mean_mse).unwrap())
            .then(a.kind.cmp(&b.kind))
            .then(a.assignment.cmp(&b.assignment))
    });

    let path: PathBuf = cfg.out_dir.join("sweep_results.csv");
    let mut text = String::from(
        "dataset,model,assignment,cv_mean_r2,cv_mean_mse,train_r2,test_r2,val_r2,test_mse,val_mse\n",
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.kind,
            r.assignment,
            r.cv_mean_r2,
            r.cv_mean_mse,
            r.train.r2,
            r.test.r2,
            r.val.r2,
            r.test.mse,
            r.val.mse
        );
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e).in_stage("emit"))?;
    Ok(rows)
}
