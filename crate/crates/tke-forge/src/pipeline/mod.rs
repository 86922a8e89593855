//! End-to-end workflow: ingest, segment, compute turbulence, correlate,
//! train all configured models, evaluate, and emit plot-ready CSV reports
//! plus a manifest.
//!
//! Runs are deterministic: all randomness derives from the configured seed,
//! training tasks get per-(model, dataset) seeds, and outputs are written in
//! a fixed order, so reruns produce byte-identical files regardless of the
//! worker count (`TKE_FORGE_THREADS`).

pub mod config;
pub mod report;
pub mod sweep;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{
    clamp_outliers, merge_clusters, parse_csv, segment_phases, ClusterDataset,
};
use crate::linalg::Matrix;
use crate::model::{self, ModelKind, ModelParams, RegressorSpec};
use crate::preprocess::{
    assemble, assign_chronological_split, assign_random_split, fit_scaler, transform,
    write_features_csv, FeatureTable, SplitLabel, FEATURE_NAMES,
};
use crate::stats::{correlation_matrices, evaluate, kde, CorrelationMatrices, KdeCurve,
    MetricsReport};
use crate::turbulence::{compute_turbulence, write_augmented_csv};

pub use config::{ClampBounds, PipelineConfig, SplitMode};
pub use report::{format_pct, metrics_csv, report_table};
pub use sweep::{grid_sweep, SweepRow};

/// Everything evaluated for one (model, dataset) pair.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub val: MetricsReport,
    /// `actual - predicted` on the test split.
    pub test_residuals: Vec<f64>,
    /// KDE of the test residuals.
    pub kde: KdeCurve,
    /// `(time_s, actual, predicted)` for every test row, in row order.
    pub predictions: Vec<(f64, f64, f64)>,
}

impl ModelEval {
    pub fn metrics(&self, split: SplitLabel) -> &MetricsReport {
        match split {
            SplitLabel::Train => &self.train,
            SplitLabel::Test => &self.test,
            SplitLabel::Val => &self.val,
        }
    }
}

/// Results of one pipeline run, keyed by (dataset, model).
#[derive(Debug, Clone, Default)]
pub struct EvaluationReport {
    pub models: BTreeMap<(String, ModelKind), ModelEval>,
    pub config_hash: String,
}

/// One dataset after ingest, turbulence and preprocessing.
pub(crate) struct PreparedDataset {
    pub name: String,
    pub table: FeatureTable,
    pub x_scaled: Matrix,
    pub corr: CorrelationMatrices,
}

fn log_line(stage: &str, detail: serde_json::Value) {
    let mut line = serde_json::json!({ "stage": stage });
    if let (Some(obj), Some(extra)) = (line.as_object_mut(), detail.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    eprintln!("{line}");
}

/// Ingest one dataset through segmentation and merging.
fn load_burn_records(cfg: &PipelineConfig, name: &str, files: &[PathBuf]) -> Result<ClusterDataset> {
    let mut merged: Option<ClusterDataset> = None;
    for file in files {
        let raw = parse_csv(file).map_err(|e| e.in_stage("ingest"))?;
        let clamped =
            clamp_outliers(&raw, cfg.clamp.lo_c, cfg.clamp.hi_c).map_err(|e| e.in_stage("clamp"))?;
        let burn =
            segment_phases(&clamped, &cfg.segmentation).map_err(|e| e.in_stage("segment"))?;
        merged = Some(match merged {
            None => burn,
            Some(acc) => merge_clusters(&acc, &burn).map_err(|e| e.in_stage("merge"))?,
        });
    }
    let mut ds = merged.expect("validated: at least one file");
    ds.name = name.to_string();
    Ok(ds)
}

/// Build the feature table, splits, scaler and correlation matrices for one
/// dataset. Pure with respect to the filesystem.
pub(crate) fn build_dataset(
    cfg: &PipelineConfig,
    name: &str,
    files: &[PathBuf],
) -> Result<(ClusterDataset, crate::turbulence::TurbulenceSeries, PreparedDataset)> {
    let ds = load_burn_records(cfg, name, files)?;
    let turb =
        compute_turbulence(&ds, cfg.ma_window).map_err(|e| e.in_stage("turbulence"))?;
    let mut table = assemble(&ds, &turb).map_err(|e| e.in_stage("assemble"))?;
    match cfg.split_mode {
        SplitMode::Shuffled => {
            assign_random_split(&mut table, &cfg.split, crate::seed::derive_seed(cfg.seed, name))
                .map_err(|e| e.in_stage("split"))?
        }
        SplitMode::Chronological => {
            assign_chronological_split(&mut table, &cfg.split).map_err(|e| e.in_stage("split"))?
        }
    }
    let scaler = fit_scaler(&table).map_err(|e| e.in_stage("scale"))?;
    let x_scaled = transform(&table.x, &scaler).map_err(|e| e.in_stage("scale"))?;

    let mut columns: Vec<(&str, &[f64])> = Vec::with_capacity(9);
    let col_data: Vec<Vec<f64>> = (0..FEATURE_NAMES.len())
        .map(|j| (0..table.len()).map(|i| table.x.get(i, j)).collect())
        .collect();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        columns.push((name, &col_data[j]));
    }
    columns.push(("tke_ma", &table.y));
    let corr = correlation_matrices(&columns).map_err(|e| e.in_stage("correlate"))?;

    Ok((
        ds,
        turb,
        PreparedDataset {
            name: name.to_string(),
            table,
            x_scaled,
            corr,
        },
    ))
}

/// Train one model on a prepared dataset and evaluate it on all splits.
pub(crate) fn train_and_evaluate(
    prepared: &PreparedDataset,
    params: &ModelParams,
    pipeline_seed: u64,
) -> Result<ModelEval> {
    let kind = params.kind();
    let spec = RegressorSpec::new(
        params.clone(),
        model::task_seed(pipeline_seed, kind, &prepared.name),
    );
    let table = &prepared.table;
    let train_idx = table.indices(SplitLabel::Train);
    let x_train = prepared.x_scaled.select_rows(&train_idx);
    let y_train: Vec<f64> = train_idx.iter().map(|&i| table.y[i]).collect();
    let fitted = model::fit(&spec, &x_train, &y_train)?;

    let mut per_split: BTreeMap<&'static str, MetricsReport> = BTreeMap::new();
    let mut test_residuals = Vec::new();
    let mut predictions = Vec::new();
    for split in SplitLabel::ALL {
        let idx = table.indices(split);
        let x = prepared.x_scaled.select_rows(&idx);
        let y: Vec<f64> = idx.iter().map(|&i| table.y[i]).collect();
        let preds = fitted.predict(&x)?;
        per_split.insert(split.as_str(), evaluate(&y, &preds)?);
        if split == SplitLabel::Test {
            test_residuals = y.iter().zip(&preds).map(|(a, p)| a - p).collect();
            predictions = idx
                .iter()
                .zip(y.iter().zip(&preds))
                .map(|(&i, (&a, &p))| (table.time_s[i], a, p))
                .collect();
        }
    }
    let curve = kde(&test_residuals, None)?;
    Ok(ModelEval {
        train: per_split["train"],
        test: per_split["test"],
        val: per_split["val"],
        test_residuals,
        kde: curve,
        predictions,
    })
}

fn write_text(path: &Path, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    written.push(path.to_path_buf());
    Ok(())
}

fn corr_csv(prepared: &[PreparedDataset], spearman: bool) -> String {
    let mut out = String::from("dataset,variable");
    for name in FEATURE_NAMES.iter() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",tke_ma\n");
    for p in prepared {
        let m = if spearman { &p.corr.spearman } else { &p.corr.pearson };
        for (i, var) in p.corr.names.iter().enumerate() {
            out.push_str(&p.name);
            out.push(',');
            out.push_str(var);
            for j in 0..p.corr.names.len() {
                out.push(',');
                out.push_str(&m.get(i, j).to_string());
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    config_hash: &'a str,
    datasets: Vec<&'a str>,
    models: Vec<&'a str>,
    outputs: Vec<String>,
}

/// Build the rayon pool honoring `TKE_FORGE_THREADS`.
pub(crate) fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("TKE_FORGE_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            Error::Parameter(format!("TKE_FORGE_THREADS must be a positive integer, got `{raw}`"))
        })?;
        if n == 0 {
            return Err(Error::Parameter(
                "TKE_FORGE_THREADS must be a positive integer".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))
}

/// Execute the full workflow. On failure every already-written output is
/// moved into `<out_dir>/quarantine` and the stage-tagged error returned.
pub fn run(cfg: &PipelineConfig) -> Result<EvaluationReport> {
    let mut written = Vec::new();
    match run_inner(cfg, &mut written) {
        Ok(report) => Ok(report),
        Err(e) => {
            quarantine(&cfg.out_dir, &written);
            log_line("error", serde_json::json!({ "message": e.to_string() }));
            Err(e)
        }
    }
}

fn run_inner(cfg: &PipelineConfig, written: &mut Vec<PathBuf>) -> Result<EvaluationReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let models = cfg.resolved_models().map_err(|e| e.in_stage("config"))?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e).in_stage("config"))?;
    let config_hash = cfg.hash();
    log_line(
        "config",
        serde_json::json!({ "hash": config_hash, "datasets": cfg.datasets.len() }),
    );

    // ingest through preprocessing, one dataset at a time
    let mut prepared = Vec::new();
    for (name, files) in &cfg.datasets {
        let (ds, turb, prep) = build_dataset(cfg, name, files)?;
        log_line(
            "prepare",
            serde_json::json!({ "dataset": name, "rows": prep.table.len() }),
        );
        let turb_path = cfg.out_dir.join(format!("turbulence_{name}.csv"));
        write_augmented_csv(&ds, &turb, &turb_path).map_err(|e| e.in_stage("emit"))?;
        written.push(turb_path);
        let feat_path = cfg.out_dir.join(format!("features_{name}.csv"));
        write_features_csv(&prep.table, &feat_path).map_err(|e| e.in_stage("emit"))?;
        written.push(feat_path);
        prepared.push(prep);
    }

    write_text(
        &cfg.out_dir.join("corr_pearson.csv"),
        &corr_csv(&prepared, false),
        written,
    )
    .map_err(|e| e.in_stage("emit"))?;
    write_text(
        &cfg.out_dir.join("corr_spearman.csv"),
        &corr_csv(&prepared, true),
        written,
    )
    .map_err(|e| e.in_stage("emit"))?;

    // independent (model, dataset) pairs train in parallel with derived
    // seeds; results are keyed and written in sorted order
    let tasks: Vec<(usize, ModelKind)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(pi, _)| models.keys().map(move |&k| (pi, k)))
        .collect();
    let pool = thread_pool().map_err(|e| e.in_stage("train"))?;
    let results: Vec<((String, ModelKind), ModelEval)> = pool
        .install(|| {
            tasks
                .par_iter()
                .map(|&(pi, kind)| {
                    let prep = &prepared[pi];
                    let eval = train_and_evaluate(prep, &models[&kind], cfg.seed)?;
                    Ok(((prep.name.clone(), kind), eval))
                })
                .collect::<Result<Vec<_>>>()
        })
        .map_err(|e| e.in_stage("train"))?;
    let mut report = EvaluationReport {
        models: BTreeMap::new(),
        config_hash: config_hash.clone(),
    };
    for (key, eval) in results {
        log_line(
            "train",
            serde_json::json!({
                "dataset": key.0,
                "model": key.1.as_str(),
                "test_r2": eval.test.r2,
            }),
        );
        report.models.insert(key, eval);
    }

    write_text(
        &cfg.out_dir.join("metrics.csv"),
        &metrics_csv(&report),
        written,
    )
    .map_err(|e| e.in_stage("emit"))?;

    for ((dataset, kind), eval) in &report.models {
        let mut kde_text = String::from("grid,density\n");
        for (g, d) in eval.kde.grid.iter().zip(&eval.kde.density) {
            kde_text.push_str(&format!("{g},{d}\n"));
        }
        write_text(
            &cfg.out_dir.join(format!("kde_{kind}_{dataset}.csv")),
            &kde_text,
            written,
        )
        .map_err(|e| e.in_stage("emit"))?;

        let mut pred_text = String::from("time_s,actual,predicted\n");
        for (t, a, p) in &eval.predictions {
            pred_text.push_str(&format!("{t},{a},{p}\n"));
        }
        write_text(
            &cfg.out_dir.join(format!("pred_{kind}_{dataset}.csv")),
            &pred_text,
            written,
        )
        .map_err(|e| e.in_stage("emit"))?;
    }

    let mut outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push("manifest.json".to_string());
    outputs.sort();
    let manifest = Manifest {
        tool: "tke-forge",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &config_hash,
        datasets: cfg.datasets.keys().map(String::as_str).collect(),
        models: models.keys().map(|k| k.as_str()).collect(),
        outputs,
    };
    let manifest_text = format!("{}\n", serde_json::to_string_pretty(&manifest)?);
    write_text(&cfg.out_dir.join("manifest.json"), &manifest_text, written)
        .map_err(|e| e.in_stage("manifest"))?;
    log_line("done", serde_json::json!({ "outputs": written.len() }));
    Ok(report)
}

fn quarantine(out_dir: &Path, written: &[PathBuf]) {
    if written.is_empty() {
        return;
    }
    let qdir = out_dir.join("quarantine");
    if fs::create_dir_all(&qdir).is_err() {
        return;
    }
    for file in written {
        if let Some(name) = file.file_name() {
            let _ = fs::rename(file, qdir.join(name));
        }
    }
}
