//! Correlation coefficients, regression metrics, and Gaussian kernel density
//! estimation of residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Pearson and Spearman coefficients for one variable pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub n: usize,
}

/// R^2, MSE and MAE for one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r2: f64,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
}

/// A kernel density estimate evaluated on an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn trapezoid_integral(&self) -> f64 {
        let mut s = 0.0;
        for i in 1..self.grid.len() {
            s += 0.5 * (self.density[i] + self.density[i - 1]) * (self.grid[i] - self.grid[i - 1]);
        }
        s
    }

    /// Grid location of the density maximum.
    pub fn peak(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.density.len() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }
}

fn check_equal_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson's correlation coefficient (centered-product form).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_equal_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            got: x.len(),
            need: 2,
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance("y".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks (1-based); tied values share the mean of their rank span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j hold ties; average of 1-based ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation. Without ties this uses the closed form
/// `1 - 6 sum(d^2) / (N (N^2 - 1))`; with ties it is the Pearson correlation
/// of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_equal_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            got: x.len(),
            need: 2,
        });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let has_ties = |r: &[f64]| r.iter().any(|v| v.fract() != 0.0) || {
        let mut sorted: Vec<f64> = r.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.windows(2).any(|w| w[0] == w[1])
    };
    if has_ties(&rx) || has_ties(&ry) {
        pearson(&rx, &ry)
    } else {
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
    }
}

/// Both correlation coefficients for one pair.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    Ok(CorrelationResult {
        pearson_r: pearson(x, y)?,
        spearman_rho: spearman(x, y)?,
        n: x.len(),
    })
}

/// Coefficient of determination, `1 - SS_res / SS_tot`. Negative values are
/// reported as-is for models worse than the mean predictor.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_equal_lengths(y, y_hat)?;
    if y.len() < 2 {
        return Err(Error::InsufficientData {
            got: y.len(),
            need: 2,
        });
    }
    let my = mean(y);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (a, p) in y.iter().zip(y_hat) {
        ss_res += (a - p) * (a - p);
        ss_tot += (a - my) * (a - my);
    }
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance("y".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean squared error.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_equal_lengths(y, y_hat)?;
    if y.is_empty() {
        return Err(Error::EmptyInput("mse of empty series"));
    }
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        / y.len() as f64)
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_equal_lengths(y, y_hat)?;
    if y.is_empty() {
        return Err(Error::EmptyInput("mae of empty series"));
    }
    Ok(y.iter().zip(y_hat).map(|(a, p)| (a - p).abs()).sum::<f64>() / y.len() as f64)
}

/// All three evaluation metrics at once.
pub fn evaluate(y: &[f64], y_hat: &[f64]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        r2: r_squared(y, y_hat)?,
        mse: mse(y, y_hat)?,
        mae: mae(y, y_hat)?,
        n: y.len(),
    })
}

/// Silverman's rule of thumb, `1.06 sigma N^(-1/5)` with the sample standard
/// deviation.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

const KDE_MIN_GRID: usize = 512;
const KDE_MAX_GRID: usize = 16384;
const KDE_TAIL_BANDWIDTHS: f64 = 5.0;

/// Gaussian kernel density estimate of a residual sample on an even grid
/// spanning the data range plus five bandwidths per side. The bandwidth
/// defaults to Silverman's rule when not given.
pub fn kde(residuals: &[f64], bandwidth: Option<f64>) -> Result<KdeCurve> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientData {
            got: residuals.len(),
            need: 2,
        });
    }
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(residuals),
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!(
            "kde bandwidth must be positive and finite, got {h}"
        )));
    }
    let lo = residuals.iter().cloned().fold(f64::INFINITY, f64::min) - KDE_TAIL_BANDWIDTHS * h;
    let hi = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + KDE_TAIL_BANDWIDTHS * h;
    // keep at least ~4 grid points per bandwidth so the trapezoid
    // normalization check is meaningful
    let wanted = (4.0 * (hi - lo) / h).ceil() as usize;
    let n_grid = wanted.clamp(KDE_MIN_GRID, KDE_MAX_GRID);

    let n = residuals.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let step = (hi - lo) / (n_grid - 1) as f64;
    let mut grid = Vec::with_capacity(n_grid);
    let mut density = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let x = lo + step * i as f64;
        let mut s = 0.0;
        for &xi in residuals {
            let u = (x - xi) / h;
            s += (-0.5 * u * u).exp();
        }
        grid.push(x);
        density.push(norm * s);
    }
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Pearson and Spearman matrices over a set of named columns, with the
/// column names retained for CSV emission.
#[derive(Debug, Clone)]
pub struct CorrelationMatrices {
    pub names: Vec<String>,
    pub pearson: Matrix,
    pub spearman: Matrix,
}

/// Pairwise correlation matrices. Symmetric with a unit diagonal; errors if
/// any column is constant, naming the column.
pub fn correlation_matrices(columns: &[(&str, &[f64])]) -> Result<CorrelationMatrices> {
    let k = columns.len();
    if k == 0 {
        return Err(Error::EmptyInput("no columns to correlate"));
    }
    for (name, col) in columns {
        if col.len() < 2 {
            return Err(Error::InsufficientData {
                got: col.len(),
                need: 2,
            });
        }
        let m = mean(col);
        if col.iter().all(|&v| v == m) || col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() == 0.0
        {
            return Err(Error::DegenerateVariance((*name).to_string()));
        }
    }
    let mut p = Matrix::zeros(k, k);
    let mut s = Matrix::zeros(k, k);
    for i in 0..k {
        p.set(i, i, 1.0);
        s.set(i, i, 1.0);
        for j in (i + 1)..k {
            let r = pearson(columns[i].1, columns[j].1)?;
            let rho = spearman(columns[i].1, columns[j].1)?;
            p.set(i, j, r);
            p.set(j, i, r);
            s.set(i, j, rho);
            s.set(j, i, rho);
        }
    }
    Ok(CorrelationMatrices {
        names: columns.iter().map(|(n, _)| (*n).to_string()).collect(),
        pearson: p,
        spearman: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_identity_and_sign() {
        let x = vec![1.0, 2.0, 5.0, 3.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_value() {
        // direct evaluation of the summation formula for x=[1,2,3], y=[1,2,4]
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 4.0];
        let (mx, my) = (2.0, 7.0 / 3.0);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den = (x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>()
            * y.iter().map(|b| (b - my) * (b - my)).sum::<f64>())
        .sqrt();
        assert!((pearson(&x, &y).unwrap() - num / den).abs() < 1e-15);
    }

    #[test]
    fn pearson_rejects_constant_series() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn pearson_rejects_length_mismatch() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn spearman_monotone_transform_is_one() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reversal_is_minus_one() {
        let x: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().rev().cloned().collect();
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_rank_pearson() {
        let x = [1.0, 1.0, 2.0];
        let y = [3.0, 5.0, 4.0];
        // ranks: x -> [1.5, 1.5, 3], y -> [1, 3, 2]; Pearson of those is 0
        let got = spearman(&x, &y).unwrap();
        let oracle = pearson(&[1.5, 1.5, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!(got.abs() < 1e-15);
    }

    #[test]
    fn average_ranks_handles_tie_runs() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn r_squared_perfect_null_and_hand_case() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let m = mean(&y);
        assert_eq!(r_squared(&y, &[m, m, m]).unwrap(), 0.0);
        // SS_res = 1, SS_tot = 2
        assert!((r_squared(&y, &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn r_squared_rejects_constant_targets() {
        assert!(matches!(
            r_squared(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn mse_mae_hand_values() {
        let y = [1.0, 1.0];
        let y_hat = [2.0, 0.0]; // residuals [-1, 1]
        assert_eq!(mse(&y, &y_hat).unwrap(), 1.0);
        assert_eq!(mae(&y, &y_hat).unwrap(), 1.0);

        let y = [3.0, 0.0, 0.0];
        let y_hat = [0.0, 0.0, 0.0]; // residuals [3, 0, 0]
        assert_eq!(mse(&y, &y_hat).unwrap(), 3.0);
        assert_eq!(mae(&y, &y_hat).unwrap(), 1.0);

        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn kde_peak_near_zero_for_centered_residuals() {
        // symmetric unimodal sample clustered at zero
        let mut residuals = vec![0.0; 10];
        for k in 1..=3 {
            let count = 8 - 2 * k;
            for _ in 0..count {
                residuals.push(k as f64 * 1e-3);
                residuals.push(-(k as f64) * 1e-3);
            }
        }
        let curve = kde(&residuals, None).unwrap();
        let step = curve.grid[1] - curve.grid[0];
        assert!(curve.peak().abs() <= step + 1e-12);
    }

    #[test]
    fn kde_integrates_to_one() {
        let residuals: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() * 2.0).collect();
        let curve = kde(&residuals, None).unwrap();
        assert!(curve.density.iter().all(|&d| d >= 0.0));
        let integral = curve.trapezoid_integral();
        assert!((integral - 1.0).abs() < 1e-3, "integral {integral}");
    }

    #[test]
    fn kde_matches_three_point_direct_sum() {
        let pts = [0.4, -1.1, 2.3];
        let h = 1.0;
        let curve = kde(&pts, Some(h)).unwrap();
        let norm = 1.0 / (3.0 * h * (2.0 * std::f64::consts::PI).sqrt());
        for (i, &x) in curve.grid.iter().enumerate() {
            let direct: f64 = pts
                .iter()
                .map(|&xi| {
                    let u = (x - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm;
            assert!((curve.density[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn kde_rejects_small_or_bad_input() {
        assert!(matches!(
            kde(&[1.0], None),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            kde(&[1.0, 2.0], Some(0.0)),
            Err(Error::Parameter(_))
        ));
        // constant residuals give a zero Silverman bandwidth
        assert!(matches!(
            kde(&[1.0, 1.0, 1.0], None),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn correlation_matrix_matches_pairwise_calls() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.2).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let c: Vec<f64> = (0..30).map(|i| ((i * i) as f64 * 0.05).cos()).collect();
        let m = correlation_matrices(&[("a", &a), ("b", &b), ("c", &c)]).unwrap();
        for i in 0..3 {
            assert_eq!(m.pearson.get(i, i), 1.0);
            assert_eq!(m.spearman.get(i, i), 1.0);
        }
        let cols = [&a, &b, &c];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.pearson.get(i, j) - m.pearson.get(j, i)).abs() < 1e-12);
                assert!((m.spearman.get(i, j) - m.spearman.get(j, i)).abs() < 1e-12);
                if i != j {
                    assert_eq!(m.pearson.get(i, j), pearson(cols[i], cols[j]).unwrap());
                    assert_eq!(m.spearman.get(i, j), spearman(cols[i], cols[j]).unwrap());
                }
            }
        }
    }

    #[test]
    fn correlation_matrix_names_constant_column() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let flat = vec![5.0; 10];
        match correlation_matrices(&[("a", &a), ("T3_C", &flat)]) {
            Err(Error::DegenerateVariance(name)) => assert_eq!(name, "T3_C"),
            other => panic!("expected degenerate-variance error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            x in proptest::collection::vec(-100.0f64..100.0, 3..40),
            a in prop::sample::select(vec![-3.0f64, -0.5, 0.7, 2.0]),
            c in prop::sample::select(vec![-2.0f64, -0.1, 1.5, 4.0]),
            b in -10.0f64..10.0,
            d in -10.0f64..10.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| (v * 0.3).sin() * 10.0 + v * 0.1).collect();
            prop_assume!(pearson(&x, &y).is_ok());
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
            let base = pearson(&x, &y).unwrap();
            let transformed = pearson(&xs, &ys).unwrap();
            let expect = (a * c).signum() * base;
            prop_assert!((transformed - expect).abs() < 1e-12);
        }

        #[test]
        fn spearman_monotone_invariance(
            x in proptest::collection::vec(-50.0f64..50.0, 3..30),
        ) {
            // distinct values so no ties appear
            let mut seen = x.clone();
            seen.sort_by(|p, q| p.partial_cmp(q).unwrap());
            prop_assume!(seen.windows(2).all(|w| w[0] != w[1]));
            let y: Vec<f64> = x.iter().map(|v| v * 0.2).collect();
            let base = spearman(&x, &y).unwrap();
            let yt: Vec<f64> = y.iter().map(|v| (v * 0.1).exp() + v.powi(3) * 1e-4).collect();
            let transformed = spearman(&x, &yt).unwrap();
            prop_assert!((base - transformed).abs() < 1e-12);
        }

        #[test]
        fn mae_squared_never_exceeds_mse(
            r in proptest::collection::vec(-10.0f64..10.0, 1..50),
        ) {
            let zeros = vec![0.0; r.len()];
            let mse_v = mse(&r, &zeros).unwrap();
            let mae_v = mae(&r, &zeros).unwrap();
            prop_assert!(mae_v * mae_v <= mse_v + 1e-12);
        }

        #[test]
        fn r_squared_affine_invariance(
            y in proptest::collection::vec(-20.0f64..20.0, 3..30),
            a in prop::sample::select(vec![-2.0f64, 0.5, 1.7]),
            b in -5.0f64..5.0,
        ) {
            let y_hat: Vec<f64> = y.iter().map(|v| v * 0.8 + 0.3).collect();
            prop_assume!(r_squared(&y, &y_hat).is_ok());
            let ys: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let ps: Vec<f64> = y_hat.iter().map(|v| a * v + b).collect();
            let base = r_squared(&y, &y_hat).unwrap();
            let scaled = r_squared(&ys, &ps).unwrap();
            prop_assert!((base - scaled).abs() < 1e-12);
        }
    }
}
