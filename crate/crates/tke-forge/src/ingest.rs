//! CSV ingestion of 10 Hz sonic-anemometer / thermocouple records: schema and
//! cadence validation, burn-phase segmentation, outlier clamping, and cluster
//! merging.
//!
//! The on-disk format is a plain UTF-8 CSV with the mandatory header
//! `time_s,u_ms,v_ms,w_ms,sonic_T_C,T1_C,...,T7_C`, `.` as the decimal
//! separator, and `#` starting comment lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names, in file order.
pub const CSV_HEADER: [&str; 12] = [
    "time_s", "u_ms", "v_ms", "w_ms", "sonic_T_C", "T1_C", "T2_C", "T3_C", "T4_C", "T5_C",
    "T6_C", "T7_C",
];

/// Nominal sample spacing, seconds.
pub const CADENCE_S: f64 = 0.1;
/// Tolerance on the nominal spacing.
pub const CADENCE_TOL_S: f64 = 1e-6;

/// One 10 Hz observation: wind vector, sonic temperature, and the seven
/// thermocouples mounted at 0, 5, 10, 20, 30, 50 and 100 cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub time_s: f64,
    pub u_ms: f64,
    pub v_ms: f64,
    pub w_ms: f64,
    pub sonic_t_c: f64,
    /// T1..T7, lowest sensor first.
    pub t_c: [f64; 7],
}

/// Burn-phase label for a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    PreBurn,
    Burn,
    PostBurn,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreBurn => "pre-burn",
            Phase::Burn => "burn",
            Phase::PostBurn => "post-burn",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Burn window boundaries, seconds since file start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegmentation {
    pub burn_start_s: f64,
    pub burn_end_s: f64,
}

impl PhaseSegmentation {
    pub fn new(burn_start_s: f64, burn_end_s: f64) -> Result<Self> {
        if !(burn_start_s < burn_end_s) {
            return Err(Error::Parameter(format!(
                "burn_start_s ({burn_start_s}) must be < burn_end_s ({burn_end_s})"
            )));
        }
        Ok(PhaseSegmentation {
            burn_start_s,
            burn_end_s,
        })
    }

    /// Label a timestamp. Boundaries are inclusive on the burn side.
    pub fn label(&self, time_s: f64) -> Phase {
        if time_s < self.burn_start_s {
            Phase::PreBurn
        } else if time_s <= self.burn_end_s {
            Phase::Burn
        } else {
            Phase::PostBurn
        }
    }
}

/// An ordered record series from one truss cluster (or a merge of several).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDataset {
    pub name: String,
    pub records: Vec<SampleRecord>,
    /// Source file names this data came from.
    pub provenance: Vec<String>,
    /// Set once the dataset has been restricted to a single phase.
    pub phase: Option<Phase>,
}

impl ClusterDataset {
    pub fn new(name: impl Into<String>, records: Vec<SampleRecord>) -> Self {
        ClusterDataset {
            name: name.into(),
            records,
            provenance: Vec::new(),
            phase: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parse one cluster file. Validates the header against [`CSV_HEADER`] and
/// the 10 Hz cadence of `time_s`.
pub fn parse_csv(path: &Path) -> Result<ClusterDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    validate_header(&headers)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut values = [0.0f64; 12];
        for (j, name) in CSV_HEADER.iter().enumerate() {
            let cell = row.get(j).unwrap_or("");
            values[j] = cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: (*name).to_string(),
                value: cell.to_string(),
            })?;
        }
        records.push(SampleRecord {
            time_s: values[0],
            u_ms: values[1],
            v_ms: values[2],
            w_ms: values[3],
            sonic_t_c: values[4],
            t_c: [
                values[5], values[6], values[7], values[8], values[9], values[10], values[11],
            ],
        });
    }

    validate_cadence(&records)?;

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(ClusterDataset {
        name,
        records,
        provenance: vec![path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()],
        phase: None,
    })
}

fn validate_header(headers: &csv::StringRecord) -> Result<()> {
    for (j, expected) in CSV_HEADER.iter().enumerate() {
        match headers.get(j) {
            Some(h) if h == *expected => {}
            Some(h) => {
                return Err(Error::Schema {
                    column: (*expected).to_string(),
                    problem: format!("expected at position {j}, found `{h}`"),
                })
            }
            None => {
                return Err(Error::Schema {
                    column: (*expected).to_string(),
                    problem: "missing".to_string(),
                })
            }
        }
    }
    if headers.len() > CSV_HEADER.len() {
        return Err(Error::Schema {
            column: headers.get(CSV_HEADER.len()).unwrap_or("").to_string(),
            problem: "unexpected extra column".to_string(),
        });
    }
    Ok(())
}

/// Check strictly increasing timestamps on the 10 Hz contract. Any step
/// outside `0.1 s +/- 1e-6` is an error at the offending timestamp, so a gap
/// never gets silently resampled.
pub fn validate_cadence(records: &[SampleRecord]) -> Result<()> {
    for pair in records.windows(2) {
        let dt = pair[1].time_s - pair[0].time_s;
        if (dt - CADENCE_S).abs() > CADENCE_TOL_S {
            return Err(Error::Cadence {
                at_s: pair[1].time_s,
                dt_s: dt,
            });
        }
    }
    Ok(())
}

/// Write a dataset in the ingest schema. Values are printed at full
/// precision, so `parse_csv(write_csv(ds))` reproduces `ds` bit-exactly.
pub fn write_csv(ds: &ClusterDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv_to(ds, &mut out).map_err(|e| Error::io(path, e))
}

fn write_csv_to<W: Write>(ds: &ClusterDataset, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for r in &ds.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.time_s,
            r.u_ms,
            r.v_ms,
            r.w_ms,
            r.sonic_t_c,
            r.t_c[0],
            r.t_c[1],
            r.t_c[2],
            r.t_c[3],
            r.t_c[4],
            r.t_c[5],
            r.t_c[6]
        )?;
    }
    out.flush()
}

/// Phase label for every record.
pub fn label_phases(ds: &ClusterDataset, seg: &PhaseSegmentation) -> Vec<Phase> {
    ds.records.iter().map(|r| seg.label(r.time_s)).collect()
}

/// Restrict a dataset to the records of one phase, preserving order.
pub fn extract_phase(
    ds: &ClusterDataset,
    seg: &PhaseSegmentation,
    phase: Phase,
) -> Result<ClusterDataset> {
    let records: Vec<SampleRecord> = ds
        .records
        .iter()
        .filter(|r| seg.label(r.time_s) == phase)
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyPhase {
            start_s: seg.burn_start_s,
            end_s: seg.burn_end_s,
        });
    }
    Ok(ClusterDataset {
        name: ds.name.clone(),
        records,
        provenance: ds.provenance.clone(),
        phase: Some(phase),
    })
}

/// Restrict to the burn window `[burn_start_s, burn_end_s]`.
pub fn segment_phases(ds: &ClusterDataset, seg: &PhaseSegmentation) -> Result<ClusterDataset> {
    extract_phase(ds, seg, Phase::Burn)
}

/// Clamp the seven thermocouple channels into `[lo_c, hi_c]`. Wind and sonic
/// temperature are left untouched; record count is preserved.
pub fn clamp_outliers(ds: &ClusterDataset, lo_c: f64, hi_c: f64) -> Result<ClusterDataset> {
    if !(lo_c < hi_c) {
        return Err(Error::Parameter(format!(
            "clamp bounds must satisfy lo < hi, got ({lo_c}, {hi_c})"
        )));
    }
    let mut out = ds.clone();
    for r in &mut out.records {
        for t in &mut r.t_c {
            *t = t.clamp(lo_c, hi_c);
        }
    }
    Ok(out)
}

/// Concatenate two datasets of the same phase. The merged name is the
/// concatenation of the input names (`B4` + `C4` = `B4C4`).
pub fn merge_clusters(a: &ClusterDataset, b: &ClusterDataset) -> Result<ClusterDataset> {
    if a.phase != b.phase {
        let show = |p: Option<Phase>| p.map_or("unsegmented".to_string(), |p| p.to_string());
        return Err(Error::PhaseMismatch {
            left: show(a.phase),
            right: show(b.phase),
        });
    }
    let mut records = a.records.clone();
    records.extend(b.records.iter().cloned());
    let mut provenance = a.provenance.clone();
    for p in &b.provenance {
        if !provenance.contains(p) {
            provenance.push(p.clone());
        }
    }
    Ok(ClusterDataset {
        name: format!("{}{}", a.name, b.name),
        records,
        provenance,
        phase: a.phase,
    })
}
