//! Gaussian process regression with an RBF + white + rational-quadratic
//! kernel, trained by maximizing the log marginal likelihood with analytic
//! gradients in log-hyperparameter space.
//!
//! Targets are centered by their training mean; a fixed diagonal jitter
//! keeps the factorization positive definite independently of the optimized
//! white-noise level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Cholesky, Matrix};
use crate::seed::{derive_seed_indexed, rng_from};

const LOG_2PI: f64 = 1.8378770664093453;
/// Box constraints for the optimizer, natural log of the hyperparameters.
const LOG_BOUNDS: [(f64, f64); 4] = [
    (-7.0, 7.0),  // rbf length scale
    (-16.0, 7.0), // white noise level
    (-7.0, 7.0),  // rq length scale
    (-7.0, 7.0),  // rq mixture
];

/// Kernel hyperparameters on their natural scale:
/// `k(a, b) = exp(-r^2 / (2 l^2)) + (1 + r^2 / (2 alpha l_q^2))^(-alpha)`,
/// plus `white_noise` on the self-covariance diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub rbf_length_scale: f64,
    pub white_noise: f64,
    pub rq_length_scale: f64,
    pub rq_alpha: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            rbf_length_scale: 1.0,
            white_noise: 1.0,
            rq_length_scale: 1.0,
            rq_alpha: 1.0,
        }
    }
}

impl KernelParams {
    fn to_log(self) -> [f64; 4] {
        [
            self.rbf_length_scale.ln(),
            self.white_noise.ln(),
            self.rq_length_scale.ln(),
            self.rq_alpha.ln(),
        ]
    }

    fn from_log(theta: &[f64; 4]) -> Self {
        KernelParams {
            rbf_length_scale: theta[0].exp(),
            white_noise: theta[1].exp(),
            rq_length_scale: theta[2].exp(),
            rq_alpha: theta[3].exp(),
        }
    }

    /// Kernel value at squared distance `r2`. `diagonal` adds the white
    /// noise term that only exists on the self-covariance diagonal.
    pub fn value(&self, r2: f64, diagonal: bool) -> f64 {
        let l2 = self.rbf_length_scale * self.rbf_length_scale;
        let rbf = (-0.5 * r2 / l2).exp();
        let lq2 = self.rq_length_scale * self.rq_length_scale;
        let s = r2 / (2.0 * self.rq_alpha * lq2);
        let rq = (1.0 + s).powf(-self.rq_alpha);
        rbf + rq + if diagonal { self.white_noise } else { 0.0 }
    }

    /// Partial derivatives of the kernel value with respect to the four
    /// log-hyperparameters, at squared distance `r2`.
    fn grads(&self, r2: f64, diagonal: bool) -> [f64; 4] {
        let l2 = self.rbf_length_scale * self.rbf_length_scale;
        let rbf = (-0.5 * r2 / l2).exp();
        let d_rbf = rbf * (r2 / l2);

        let d_white = if diagonal { self.white_noise } else { 0.0 };

        let lq2 = self.rq_length_scale * self.rq_length_scale;
        let a = self.rq_alpha;
        let s = r2 / (2.0 * a * lq2);
        let rq = (1.0 + s).powf(-a);
        let d_rq_l = rq * 2.0 * a * s / (1.0 + s);
        let d_rq_a = rq * a * (s / (1.0 + s) - (1.0 + s).ln());

        [d_rbf, d_white, d_rq_l, d_rq_a]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprParams {
    /// Initial kernel hyperparameters (the first optimizer restart starts
    /// here).
    pub rbf_length_scale: f64,
    pub white_noise: f64,
    pub rq_length_scale: f64,
    pub rq_alpha: f64,
    /// Fixed diagonal jitter added to the covariance.
    pub alpha: f64,
    /// Number of gradient-ascent runs; 0 keeps the initial hyperparameters.
    pub restarts: usize,
    pub max_iter: usize,
    /// Hard cap on stored training rows; larger sets are evenly subsampled.
    pub max_train: usize,
    /// Row cap for the likelihood optimization phase.
    pub opt_subsample: usize,
}

impl Default for GprParams {
    fn default() -> Self {
        GprParams {
            rbf_length_scale: 1.0,
            white_noise: 1.0,
            rq_length_scale: 1.0,
            rq_alpha: 1.0,
            alpha: 0.01,
            restarts: 3,
            max_iter: 30,
            max_train: 4000,
            opt_subsample: 640,
        }
    }
}

impl GprParams {
    fn initial_kernel(&self) -> KernelParams {
        KernelParams {
            rbf_length_scale: self.rbf_length_scale,
            white_noise: self.white_noise,
            rq_length_scale: self.rq_length_scale,
            rq_alpha: self.rq_alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprModel {
    kernel: KernelParams,
    jitter: f64,
    x_train: Matrix,
    y_mean: f64,
    chol: Cholesky,
    /// `(K + jitter I)^{-1} (y - mean)`
    weights: Vec<f64>,
}

/// Pairwise squared distances of the rows of `x`.
fn distance_matrix(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = squared_distance(x.row(i), x.row(j));
            d.set(i, j, r2);
            d.set(j, i, r2);
        }
    }
    d
}

fn covariance(kernel: &KernelParams, jitter: f64, r2: &Matrix) -> Matrix {
    let n = r2.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.value(r2.get(i, j), i == j);
            k.set(i, j, v);
            k.set(j, i, v);
        }
        *k.row_mut(i).get_mut(i).unwrap() += jitter;
    }
    k
}

fn center(y: &[f64]) -> (f64, Vec<f64>) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    (mean, y.iter().map(|v| v - mean).collect())
}

/// Log marginal likelihood for a prebuilt covariance.
fn lml_with_cov(k_y: &Matrix, y_centered: &[f64]) -> Option<(f64, Cholesky, Vec<f64>)> {
    let chol = Cholesky::factor(k_y)?;
    let weights = chol.solve(y_centered);
    let fit: f64 = y_centered.iter().zip(&weights).map(|(a, b)| a * b).sum();
    let n = y_centered.len() as f64;
    let value = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n * LOG_2PI;
    Some((value, chol, weights))
}

/// Log marginal likelihood of `(x, y)` under the kernel; `y` is centered by
/// its own mean.
pub fn log_marginal_likelihood(
    kernel: &KernelParams,
    jitter: f64,
    x: &Matrix,
    y: &[f64],
) -> Result<f64> {
    let r2 = distance_matrix(x);
    let (_, yc) = center(y);
    match lml_with_cov(&covariance(kernel, jitter, &r2), &yc) {
        Some((v, _, _)) => Ok(v),
        None => Err(Error::Conditioning { jitter }),
    }
}

/// Log marginal likelihood and its gradient with respect to the four
/// log-hyperparameters, via `0.5 tr((ww^T - K^{-1}) dK/dtheta)`.
pub fn log_marginal_likelihood_grad(
    kernel: &KernelParams,
    jitter: f64,
    x: &Matrix,
    y: &[f64],
) -> Result<(f64, [f64; 4])> {
    let r2 = distance_matrix(x);
    let (_, yc) = center(y);
    lml_grad_given_r2(kernel, jitter, &r2, &yc).ok_or(Error::Conditioning { jitter })
}

fn lml_grad_given_r2(
    kernel: &KernelParams,
    jitter: f64,
    r2: &Matrix,
    y_centered: &[f64],
) -> Option<(f64, [f64; 4])> {
    let n = y_centered.len();
    let (value, chol, w) = lml_with_cov(&covariance(kernel, jitter, r2), y_centered)?;
    let k_inv = chol.inverse();
    let mut grad = [0.0f64; 4];
    for i in 0..n {
        for j in i..n {
            let t = w[i] * w[j] - k_inv.get(i, j);
            let factor = if i == j { 0.5 } else { 1.0 };
            let dk = kernel.grads(r2.get(i, j), i == j);
            for (g, d) in grad.iter_mut().zip(dk) {
                *g += factor * t * d;
            }
        }
    }
    Some((value, grad))
}

/// Outcome of one gradient-ascent run.
struct AscentResult {
    theta: [f64; 4],
    value: f64,
    start_value: f64,
}

fn project(theta: &mut [f64; 4]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(LOG_BOUNDS) {
        *t = t.clamp(lo, hi);
    }
}

fn ascend(
    start: [f64; 4],
    jitter: f64,
    r2: &Matrix,
    y_centered: &[f64],
    max_iter: usize,
) -> Option<AscentResult> {
    let mut theta = start;
    project(&mut theta);
    let (mut value, mut grad) =
        lml_grad_given_r2(&KernelParams::from_log(&theta), jitter, r2, y_centered)?;
    let start_value = value;
    for _ in 0..max_iter {
        let g_norm_sq: f64 = grad.iter().map(|g| g * g).sum();
        let g_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if g_inf < 1e-5 {
            break;
        }
        // backtracking line search along the gradient
        let mut step = 1.0 / g_inf.max(1.0);
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = theta;
            for (c, g) in cand.iter_mut().zip(grad) {
                *c += step * g;
            }
            project(&mut cand);
            let trial = lml_with_cov(
                &covariance(&KernelParams::from_log(&cand), jitter, r2),
                y_centered,
            )
            .map(|(v, _, _)| v);
            if let Some(v) = trial {
                if v > value + 1e-4 * step * g_norm_sq {
                    let refreshed = lml_grad_given_r2(
                        &KernelParams::from_log(&cand),
                        jitter,
                        r2,
                        y_centered,
                    )?;
                    theta = cand;
                    value = refreshed.0;
                    grad = refreshed.1;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(AscentResult {
        theta,
        value,
        start_value,
    })
}

/// Evenly spaced deterministic subsample of `0..n`.
fn even_subsample(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

impl GprModel {
    /// Optimize the kernel by gradient ascent on the log marginal likelihood
    /// (best of `restarts` runs), then factor the covariance of the retained
    /// training rows. Every run's final likelihood is at least its starting
    /// value.
    pub fn fit(params: &GprParams, x: &Matrix, y: &[f64], seed: u64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() < 2 {
            return Err(Error::InsufficientData {
                got: x.rows(),
                need: 2,
            });
        }
        let keep = even_subsample(x.rows(), params.max_train);
        let x_train = x.select_rows(&keep);
        let y_train: Vec<f64> = keep.iter().map(|&i| y[i]).collect();

        let kernel = if params.restarts == 0 {
            params.initial_kernel()
        } else {
            let opt_rows = even_subsample(x_train.rows(), params.opt_subsample);
            let x_opt = x_train.select_rows(&opt_rows);
            let y_opt: Vec<f64> = opt_rows.iter().map(|&i| y_train[i]).collect();
            let r2 = distance_matrix(&x_opt);
            let (_, yc) = center(&y_opt);

            let mut best: Option<AscentResult> = None;
            for restart in 0..params.restarts {
                let start = if restart == 0 {
                    params.initial_kernel().to_log()
                } else {
                    let mut rng = rng_from(derive_seed_indexed(seed, "gpr-restart", restart as u64));
                    let mut t = [0.0f64; 4];
                    for v in &mut t {
                        *v = rng.gen_range(0.05f64.ln()..20.0f64.ln());
                    }
                    t
                };
                if let Some(run) = ascend(start, params.alpha, &r2, &yc, params.max_iter) {
                    debug_assert!(run.value >= run.start_value - 1e-9);
                    if best.as_ref().is_none_or(|b| run.value > b.value) {
                        best = Some(run);
                    }
                }
            }
            let best = best.ok_or(Error::Conditioning {
                jitter: params.alpha,
            })?;
            KernelParams::from_log(&best.theta)
        };

        let (y_mean, yc) = center(&y_train);
        let r2 = distance_matrix(&x_train);
        let (_, chol, weights) = lml_with_cov(&covariance(&kernel, params.alpha, &r2), &yc)
            .ok_or(Error::Conditioning {
                jitter: params.alpha,
            })?;
        Ok(GprModel {
            kernel,
            jitter: params.alpha,
            x_train,
            y_mean,
            chol,
            weights,
        })
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn train_rows(&self) -> usize {
        self.x_train.rows()
    }

    fn cross_covariance(&self, row: &[f64]) -> Vec<f64> {
        (0..self.x_train.rows())
            .map(|j| {
                self.kernel
                    .value(squared_distance(row, self.x_train.row(j)), false)
            })
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.x_train.cols() {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                row.len(),
                self.x_train.cols()
            )));
        }
        let k_star = self.cross_covariance(row);
        let dot: f64 = k_star.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        Ok(self.y_mean + dot)
    }

    /// Posterior mean and latent standard deviation.
    pub fn predict_row_with_std(&self, row: &[f64]) -> Result<(f64, f64)> {
        let mean = self.predict_row(row)?;
        let k_star = self.cross_covariance(row);
        let v = self.chol.solve_lower(&k_star);
        let prior = self.kernel.value(0.0, false);
        let var = (prior - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        Ok((mean, var.sqrt()))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_row(row)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_inputs(n: usize, dims: usize, scale: f64) -> Matrix {
        Matrix::from_rows(
            &(0..n)
                .map(|i| {
                    (0..dims)
                        .map(|d| ((i * dims + d) as f64 * 0.7389).sin() * scale)
                        .collect()
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_unit_covariance_lml() {
        // with K + jitter = [[1]] and centered target 0 the value reduces to
        // the constant term -log(2 pi) / 2
        let k = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let (value, _, _) = lml_with_cov(&k, &[0.0]).unwrap();
        assert!((value + 0.5 * LOG_2PI).abs() < 1e-15);
    }

    #[test]
    fn lml_matches_dense_three_point_evaluation() {
        let kernel = KernelParams {
            rbf_length_scale: 0.8,
            white_noise: 0.3,
            rq_length_scale: 1.4,
            rq_alpha: 0.9,
        };
        let x = toy_inputs(3, 2, 1.0);
        let y = [1.0, -0.5, 2.0];
        let jitter = 0.05;
        let got = log_marginal_likelihood(&kernel, jitter, &x, &y).unwrap();

        // dense route: explicit 3x3 inverse and determinant
        let r2 = distance_matrix(&x);
        let k = covariance(&kernel, jitter, &r2);
        let (m, yc) = center(&y);
        assert!(m.is_finite());
        let a = [
            [k.get(0, 0), k.get(0, 1), k.get(0, 2)],
            [k.get(1, 0), k.get(1, 1), k.get(1, 2)],
            [k.get(2, 0), k.get(2, 1), k.get(2, 2)],
        ];
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let mut inv = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let sub: Vec<f64> = (0..3)
                    .filter(|&r| r != i)
                    .flat_map(|r| (0..3).filter(|&c| c != j).map(move |c| a[r][c]))
                    .collect();
                let minor = sub[0] * sub[3] - sub[1] * sub[2];
                inv[j][i] = if (i + j) % 2 == 0 { minor } else { -minor } / det;
            }
        }
        let mut fit = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                fit += yc[i] * inv[i][j] * yc[j];
            }
        }
        let expect = -0.5 * fit - 0.5 * det.ln() - 1.5 * LOG_2PI;
        assert!(
            (got - expect).abs() < 1e-10,
            "cholesky {got} vs dense {expect}"
        );
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = toy_inputs(10, 3, 1.5);
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.63).cos() * 2.0).collect();
        let kernel = KernelParams {
            rbf_length_scale: 1.2,
            white_noise: 0.4,
            rq_length_scale: 0.7,
            rq_alpha: 1.5,
        };
        let jitter = 0.01;
        let (_, grad) = log_marginal_likelihood_grad(&kernel, jitter, &x, &y).unwrap();
        let theta = kernel.to_log();
        let eps = 1e-6;
        for p in 0..4 {
            let mut plus = theta;
            plus[p] += eps;
            let mut minus = theta;
            minus[p] -= eps;
            let f_plus =
                log_marginal_likelihood(&KernelParams::from_log(&plus), jitter, &x, &y).unwrap();
            let f_minus =
                log_marginal_likelihood(&KernelParams::from_log(&minus), jitter, &x, &y).unwrap();
            let fd = (f_plus - f_minus) / (2.0 * eps);
            let rel = (grad[p] - fd).abs() / grad[p].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-5, "param {p}: analytic {} vs fd {fd}", grad[p]);
        }
    }

    #[test]
    fn posterior_mean_matches_three_point_solve() {
        let kernel = KernelParams {
            rbf_length_scale: 1.0,
            white_noise: 0.1,
            rq_length_scale: 1.0,
            rq_alpha: 1.0,
        };
        let x = toy_inputs(3, 2, 1.0);
        let y = [0.3, -1.2, 0.9];
        let params = GprParams {
            restarts: 0,
            white_noise: 0.1,
            ..GprParams::default()
        };
        let model = GprModel::fit(&params, &x, &y, 0).unwrap();

        // oracle: solve (K + jitter I) w = y - mean by Gaussian elimination
        let r2 = distance_matrix(&x);
        let k = covariance(&kernel, params.alpha, &r2);
        let (mean, yc) = center(&y);
        let mut aug = [[0.0f64; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                aug[i][j] = k.get(i, j);
            }
            aug[i][3] = yc[i];
        }
        for col in 0..3 {
            let pivot = (col..3).max_by(|&a, &b| {
                aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap()
            });
            let p = pivot.unwrap();
            aug.swap(col, p);
            for r in (col + 1)..3 {
                let f = aug[r][col] / aug[col][col];
                for c in col..4 {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
        let mut w = [0.0f64; 3];
        for i in (0..3).rev() {
            let mut s = aug[i][3];
            for j in (i + 1)..3 {
                s -= aug[i][j] * w[j];
            }
            w[i] = s / aug[i][i];
        }
        let q = [0.2, -0.4];
        let expect: f64 = mean
            + (0..3)
                .map(|j| kernel.value(squared_distance(&q, x.row(j)), false) * w[j])
                .sum::<f64>();
        let got = model.predict_row(&q).unwrap();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn near_interpolation_with_tiny_jitter() {
        let n = 12;
        let x = Matrix::from_rows(
            &(0..n).map(|i| vec![i as f64 * 0.5]).collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.5).sin()).collect();
        let params = GprParams {
            white_noise: 1e-10,
            alpha: 1e-10,
            restarts: 0,
            ..GprParams::default()
        };
        let model = GprModel::fit(&params, &x, &y, 0).unwrap();
        for i in 0..n {
            let p = model.predict_row(x.row(i)).unwrap();
            assert!((p - y[i]).abs() < 1e-6, "at {i}: {p} vs {}", y[i]);
        }
    }

    #[test]
    fn optimizer_never_loses_to_its_start() {
        let x = toy_inputs(20, 2, 2.0);
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.41).sin() * 3.0 + 0.5).collect();
        let r2 = distance_matrix(&x);
        let (_, yc) = center(&y);
        for s in 0..5 {
            let mut rng = rng_from(s);
            let start = [
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-2.0f64..0.0),
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-1.0f64..1.0),
            ];
            let run = ascend(start, 0.01, &r2, &yc, 40).unwrap();
            assert!(
                run.value >= run.start_value - 1e-9,
                "seed {s}: {} < {}",
                run.value,
                run.start_value
            );
        }
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let x = toy_inputs(8, 2, 1.0);
        let y = vec![4.25; 8];
        let params = GprParams {
            restarts: 0,
            ..GprParams::default()
        };
        let model = GprModel::fit(&params, &x, &y, 0).unwrap();
        let p = model.predict_row(&[0.3, 0.4]).unwrap();
        assert!((p - 4.25).abs() < 1e-9);
    }

    #[test]
    fn subsampling_caps_training_rows() {
        let x = toy_inputs(50, 2, 1.0);
        let y: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let params = GprParams {
            max_train: 20,
            restarts: 0,
            ..GprParams::default()
        };
        let model = GprModel::fit(&params, &x, &y, 0).unwrap();
        assert_eq!(model.train_rows(), 20);
    }

    #[test]
    fn kernel_matrices_are_symmetric_and_factorable() {
        for s in 0..50 {
            let mut rng = rng_from(s);
            let rows: Vec<Vec<f64>> = (0..12)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let kernel = KernelParams {
                rbf_length_scale: rng.gen_range(0.2..3.0),
                white_noise: rng.gen_range(0.01..1.0),
                rq_length_scale: rng.gen_range(0.2..3.0),
                rq_alpha: rng.gen_range(0.3..3.0),
            };
            let k = covariance(&kernel, 0.01, &distance_matrix(&x));
            assert!(k.asymmetry() < 1e-12);
            assert!(Cholesky::factor(&k).is_some(), "seed {s} not PD");
        }
    }
}
