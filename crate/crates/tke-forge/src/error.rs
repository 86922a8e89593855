//! Error types shared across the toolkit.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions raised by the library.
#[derive(Error, Debug)]
pub enum Error {
    /// CSV header does not match the declared column schema.
    #[error("schema error: column `{column}` {problem}")]
    Schema { column: String, problem: String },

    /// A cell failed to parse as a number.
    #[error("parse error at line {line}, column `{column}`: `{value}` is not a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },

    /// Sample cadence deviates from the 10 Hz contract.
    #[error("cadence error at t = {at_s} s: step of {dt_s} s violates the 0.1 s cadence")]
    Cadence { at_s: f64, dt_s: f64 },

    /// Phase extraction selected no records.
    #[error("empty phase: no records in [{start_s}, {end_s}] s")]
    EmptyPhase { start_s: f64, end_s: f64 },

    /// Datasets cannot be merged across phases.
    #[error("merge error: phase `{left}` does not match phase `{right}`")]
    PhaseMismatch { left: String, right: String },

    /// An operation that requires data received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Series lengths or matrix shapes disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A variance-based statistic met a constant series.
    #[error("degenerate variance in `{0}`")]
    DegenerateVariance(String),

    /// Fewer samples than the operation can work with.
    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    /// Predictor rows and target rows are not aligned.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// An invalid parameter value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Kernel matrix factorization failed.
    #[error("conditioning error: Cholesky failed at jitter {jitter}")]
    Conditioning { jitter: f64 },

    /// Training produced a non-finite loss.
    #[error("divergence error: non-finite loss at step {step}")]
    Divergence { step: usize },

    /// A report is missing a configured (model, dataset) cell.
    #[error("missing cell: model `{model}` on dataset `{dataset}`")]
    MissingCell { model: String, dataset: String },

    /// A pipeline stage failed; wraps the underlying error with its stage tag.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// Model container bytes are not a valid serialized model.
    #[error("model container error: {0}")]
    Container(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
