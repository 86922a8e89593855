//! Turbulent kinetic energy from wind series: fluctuations about the segment
//! mean, per-sample TKE, the trailing moving average used as the regression
//! target, and sonic temperature conversions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ClusterDataset, CSV_HEADER};

/// Per-sample wind deviations from the segment mean, m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct WindFluctuations {
    pub u_p: Vec<f64>,
    pub v_p: Vec<f64>,
    pub w_p: Vec<f64>,
}

impl WindFluctuations {
    pub fn len(&self) -> usize {
        self.u_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_p.is_empty()
    }
}

/// Per-sample TKE and its trailing moving average, aligned to the source
/// record timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceSeries {
    pub time_s: Vec<f64>,
    /// m^2/s^2
    pub tke: Vec<f64>,
    /// m^2/s^2, trailing moving average of `tke`
    pub tke_ma: Vec<f64>,
}

/// Constants of the speed-of-sound relation `c = sqrt(gamma R T / M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonicTempParams {
    /// Ratio of specific heats, dimensionless.
    pub gamma: f64,
    /// Universal gas constant, J/(mol K).
    pub r_gas: f64,
    /// Molar mass of air, kg/mol.
    pub molar_mass: f64,
}

impl Default for SonicTempParams {
    fn default() -> Self {
        // dry air
        SonicTempParams {
            gamma: 1.4,
            r_gas: 8.314462618,
            molar_mass: 0.0289644,
        }
    }
}

impl SonicTempParams {
    fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 || self.r_gas <= 0.0 || self.molar_mass <= 0.0 {
            return Err(Error::Parameter(
                "sonic temperature constants must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Deviations of u, v, w from their means over the whole dataset (the
/// analysis segment). The fluctuation means are zero by construction.
pub fn compute_fluctuations(ds: &ClusterDataset) -> Result<WindFluctuations> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("cannot compute fluctuations of an empty dataset"));
    }
    let n = ds.len() as f64;
    let (mut mu, mut mv, mut mw) = (0.0, 0.0, 0.0);
    for r in &ds.records {
        mu += r.u_ms;
        mv += r.v_ms;
        mw += r.w_ms;
    }
    mu /= n;
    mv /= n;
    mw /= n;
    Ok(WindFluctuations {
        u_p: ds.records.iter().map(|r| r.u_ms - mu).collect(),
        v_p: ds.records.iter().map(|r| r.v_ms - mv).collect(),
        w_p: ds.records.iter().map(|r| r.w_ms - mw).collect(),
    })
}

/// Alternative fluctuation mode for sensitivity studies: deviations from a
/// trailing rolling mean instead of the segment mean.
pub fn compute_fluctuations_rolling(ds: &ClusterDataset, window: usize) -> Result<WindFluctuations> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("cannot compute fluctuations of an empty dataset"));
    }
    let u: Vec<f64> = ds.records.iter().map(|r| r.u_ms).collect();
    let v: Vec<f64> = ds.records.iter().map(|r| r.v_ms).collect();
    let w: Vec<f64> = ds.records.iter().map(|r| r.w_ms).collect();
    let (mu, mv, mw) = (
        moving_average(&u, window)?,
        moving_average(&v, window)?,
        moving_average(&w, window)?,
    );
    Ok(WindFluctuations {
        u_p: u.iter().zip(&mu).map(|(x, m)| x - m).collect(),
        v_p: v.iter().zip(&mv).map(|(x, m)| x - m).collect(),
        w_p: w.iter().zip(&mw).map(|(x, m)| x - m).collect(),
    })
}

/// Instantaneous TKE per sample: half the sum of squared fluctuations.
pub fn compute_tke(fl: &WindFluctuations) -> Result<Vec<f64>> {
    if fl.is_empty() {
        return Err(Error::EmptyInput("cannot compute TKE of an empty series"));
    }
    Ok(fl
        .u_p
        .iter()
        .zip(&fl.v_p)
        .zip(&fl.w_p)
        .map(|((u, v), w)| 0.5 * (u * u + v * v + w * w))
        .collect())
}

/// Trailing moving average with an expanding warm-up: entry `i` averages the
/// last `window` points, or the first `i + 1` points while `i < window - 1`.
/// Output length equals input length.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Parameter("moving-average window must be >= 1".into()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("cannot average an empty series"));
    }
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let lo = (i + 1).saturating_sub(window);
        let span = &x[lo..=i];
        out.push(span.iter().sum::<f64>() / span.len() as f64);
    }
    Ok(out)
}

/// Full turbulence product for a dataset: TKE plus its `ma_window`-point
/// trailing moving average, timestamp-aligned with the records.
pub fn compute_turbulence(ds: &ClusterDataset, ma_window: usize) -> Result<TurbulenceSeries> {
    let fl = compute_fluctuations(ds)?;
    let tke = compute_tke(&fl)?;
    let tke_ma = moving_average(&tke, ma_window)?;
    Ok(TurbulenceSeries {
        time_s: ds.records.iter().map(|r| r.time_s).collect(),
        tke,
        tke_ma,
    })
}

/// Invert `c = sqrt(gamma R T / M)` to recover the absolute temperature in
/// Kelvin from a speed of sound in m/s.
pub fn sonic_speed_to_temperature(c_ms: f64, p: &SonicTempParams) -> Result<f64> {
    p.validate()?;
    if c_ms <= 0.0 {
        return Err(Error::Parameter(format!(
            "speed of sound must be positive, got {c_ms}"
        )));
    }
    Ok(c_ms * c_ms * p.molar_mass / (p.gamma * p.r_gas))
}

/// Forward relation: speed of sound from an absolute temperature in Kelvin.
pub fn sonic_temperature_to_speed(t_k: f64, p: &SonicTempParams) -> Result<f64> {
    p.validate()?;
    if t_k <= 0.0 {
        return Err(Error::Parameter(format!(
            "absolute temperature must be positive, got {t_k}"
        )));
    }
    Ok((p.gamma * p.r_gas * t_k / p.molar_mass).sqrt())
}

/// Write the source columns augmented with `tke,tke_ma`.
pub fn write_augmented_csv(
    ds: &ClusterDataset,
    turb: &TurbulenceSeries,
    path: &Path,
) -> Result<()> {
    if ds.len() != turb.tke.len() {
        return Err(Error::Shape(format!(
            "dataset has {} records but turbulence series has {}",
            ds.len(),
            turb.tke.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{},tke,tke_ma", CSV_HEADER.join(","))?;
        for (i, r) in ds.records.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
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
                r.t_c[6],
                turb.tke[i],
                turb.tke_ma[i]
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SampleRecord;
    use proptest::prelude::*;

    fn wind_dataset(u: &[f64], v: &[f64], w: &[f64]) -> ClusterDataset {
        let records = (0..u.len())
            .map(|i| SampleRecord {
                time_s: i as f64 / 10.0,
                u_ms: u[i],
                v_ms: v[i],
                w_ms: w[i],
                sonic_t_c: 20.0,
                t_c: [20.0; 7],
            })
            .collect();
        ClusterDataset::new("W", records)
    }

    #[test]
    fn constant_wind_has_zero_fluctuations() {
        let ds = wind_dataset(&[2.0; 5], &[2.0; 5], &[2.0; 5]);
        let fl = compute_fluctuations(&ds).unwrap();
        assert!(fl.u_p.iter().all(|&x| x == 0.0));
        assert!(fl.v_p.iter().all(|&x| x == 0.0));
        assert!(fl.w_p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_point_fluctuations_by_hand() {
        let ds = wind_dataset(&[2.0, 4.0], &[0.0, 0.0], &[0.0, 0.0]);
        let fl = compute_fluctuations(&ds).unwrap();
        assert_eq!(fl.u_p, vec![-1.0, 1.0]);
    }

    #[test]
    fn fluctuation_means_vanish() {
        let u: Vec<f64> = (0..500).map(|i| (i as f64 * 0.7).sin() + 3.0).collect();
        let v: Vec<f64> = (0..500).map(|i| (i as f64 * 0.3).cos() - 1.0).collect();
        let w: Vec<f64> = (0..500).map(|i| (i as f64).sqrt()).collect();
        let fl = compute_fluctuations(&wind_dataset(&u, &v, &w)).unwrap();
        for series in [&fl.u_p, &fl.v_p, &fl.w_p] {
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            assert!(mean.abs() < 1e-9, "residual mean {mean}");
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = ClusterDataset::new("E", vec![]);
        assert!(matches!(
            compute_fluctuations(&ds),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn tke_hand_values() {
        let fl = WindFluctuations {
            u_p: vec![-1.0, 1.0],
            v_p: vec![0.0, 0.0],
            w_p: vec![0.0, 0.0],
        };
        assert_eq!(compute_tke(&fl).unwrap(), vec![0.5, 0.5]);

        let fl = WindFluctuations {
            u_p: vec![1.0],
            v_p: vec![1.0],
            w_p: vec![1.0],
        };
        assert_eq!(compute_tke(&fl).unwrap(), vec![1.5]);

        let fl = WindFluctuations {
            u_p: vec![0.0; 3],
            v_p: vec![0.0; 3],
            w_p: vec![0.0; 3],
        };
        assert!(compute_tke(&fl).unwrap().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn moving_average_hand_case() {
        let out = moving_average(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn moving_average_window_one_is_identity() {
        let x = vec![3.0, -1.0, 2.5];
        assert_eq!(moving_average(&x, 1).unwrap(), x);
    }

    #[test]
    fn moving_average_constant_invariance() {
        for window in [1, 3, 10, 100] {
            let out = moving_average(&[4.25; 37], window).unwrap();
            assert!(out.iter().all(|&x| x == 4.25));
        }
    }

    #[test]
    fn moving_average_zero_window_is_parameter_error() {
        assert!(matches!(
            moving_average(&[1.0], 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn sonic_round_trip() {
        let p = SonicTempParams::default();
        let c = sonic_temperature_to_speed(293.15, &p).unwrap();
        let t = sonic_speed_to_temperature(c, &p).unwrap();
        assert!((t - 293.15).abs() / 293.15 < 1e-9);
    }

    #[test]
    fn sonic_known_speed() {
        // c for dry air at ~293 K is near 343 m/s; direct formula evaluation:
        // T = c^2 M / (gamma R) = 343.2^2 * 0.0289644 / (1.4 * 8.314462618)
        let p = SonicTempParams::default();
        let t = sonic_speed_to_temperature(343.2, &p).unwrap();
        let direct = 343.2_f64 * 343.2 * 0.0289644 / (1.4 * 8.314462618);
        assert_eq!(t, direct);
        assert!((t - 293.0).abs() < 1.0, "got {t} K");
    }

    #[test]
    fn sonic_rejects_nonpositive_speed() {
        let p = SonicTempParams::default();
        assert!(sonic_speed_to_temperature(0.0, &p).is_err());
        assert!(sonic_speed_to_temperature(-10.0, &p).is_err());
    }

    #[test]
    fn turbulence_series_is_aligned_and_nonnegative() {
        let u: Vec<f64> = (0..200).map(|i| (i as f64 * 0.11).sin()).collect();
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * 0.07).cos()).collect();
        let w: Vec<f64> = (0..200).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let ds = wind_dataset(&u, &v, &w);
        let turb = compute_turbulence(&ds, 10).unwrap();
        assert_eq!(turb.time_s.len(), ds.len());
        assert_eq!(turb.tke.len(), ds.len());
        assert_eq!(turb.tke_ma.len(), ds.len());
        assert!(turb.tke.iter().all(|&t| t >= 0.0));
        assert!(turb.tke_ma.iter().all(|&t| t >= 0.0));
        assert_eq!(turb.time_s, ds.records.iter().map(|r| r.time_s).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn moving_average_is_bounded_by_extremes(
            x in proptest::collection::vec(-1e3f64..1e3, 1..60),
            window in 1usize..20,
        ) {
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for m in moving_average(&x, window).unwrap() {
                prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
            }
        }

        #[test]
        fn tke_scale_and_translation_behavior(
            u in proptest::collection::vec(-5.0f64..5.0, 4..40),
            shift in -10.0f64..10.0,
        ) {
            let n = u.len();
            let v: Vec<f64> = u.iter().map(|x| x * 0.5 - 1.0).collect();
            let w: Vec<f64> = u.iter().map(|x| (x * 1.3).sin()).collect();
            let base = compute_tke(&compute_fluctuations(&wind_dataset(&u, &v, &w)).unwrap()).unwrap();

            // scaling all components by s scales tke by s^2
            let s = 2.0;
            let us: Vec<f64> = u.iter().map(|x| x * s).collect();
            let vs: Vec<f64> = v.iter().map(|x| x * s).collect();
            let ws: Vec<f64> = w.iter().map(|x| x * s).collect();
            let scaled = compute_tke(&compute_fluctuations(&wind_dataset(&us, &vs, &ws)).unwrap()).unwrap();
            for i in 0..n {
                let expect = base[i] * s * s;
                prop_assert!((scaled[i] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }

            // adding a constant to any component leaves tke unchanged
            let ut: Vec<f64> = u.iter().map(|x| x + shift).collect();
            let translated = compute_tke(&compute_fluctuations(&wind_dataset(&ut, &v, &w)).unwrap()).unwrap();
            for i in 0..n {
                prop_assert!((translated[i] - base[i]).abs() <= 1e-12 * base[i].abs().max(1.0));
            }
        }
    }
}
